//! The mixture density network with its input/output standardization,
//! physical-unit predictions, input Jacobians and the binary model file.

use crate::gmm::{self, D, K, OUTPUTS};
use crate::net::{self, Arch, Params};
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use coldbend_core::shell::Material;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Cursor, Read};
use std::path::Path;

pub const INPUTS: usize = 18;
pub const MODEL_MAGIC: &[u8; 8] = b"CBMDN\0\0\0";
pub const MODEL_VERSION: u32 = 1;

/// Per-dimension affine maps `x_std = (x - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
    /// Per-input range seen in training.
    pub in_min: Vec<f64>,
    pub in_max: Vec<f64>,
}

fn mean_std(rows: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for d in 0..dim {
            mean[d] += r[d] / n;
        }
    }
    let mut var = vec![0.0; dim];
    for r in rows {
        for d in 0..dim {
            var[d] += (r[d] - mean[d]).powi(2) / n;
        }
    }
    let std = var.into_iter().map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 }).collect();
    (mean, std)
}

impl Standardization {
    pub fn identity() -> Self {
        Self {
            in_mean: vec![0.0; INPUTS],
            in_std: vec![1.0; INPUTS],
            out_mean: vec![0.0; D],
            out_std: vec![1.0; D],
            in_min: vec![f64::NEG_INFINITY; INPUTS],
            in_max: vec![f64::INFINITY; INPUTS],
        }
    }

    pub fn fit(inputs: &[[f64; INPUTS]], targets: &[[f64; D]]) -> Self {
        let ri: Vec<&[f64]> = inputs.iter().map(|r| r.as_slice()).collect();
        let rt: Vec<&[f64]> = targets.iter().map(|r| r.as_slice()).collect();
        let (in_mean, in_std) = mean_std(&ri, INPUTS);
        let (out_mean, out_std) = mean_std(&rt, D);
        let mut in_min = vec![f64::INFINITY; INPUTS];
        let mut in_max = vec![f64::NEG_INFINITY; INPUTS];
        for r in inputs {
            for d in 0..INPUTS {
                in_min[d] = in_min[d].min(r[d]);
                in_max[d] = in_max[d].max(r[d]);
            }
        }
        Self { in_mean, in_std, out_mean, out_std, in_min, in_max }
    }

    pub fn input(&self, p: &[f64; INPUTS]) -> [f64; INPUTS] {
        std::array::from_fn(|d| (p[d] - self.in_mean[d]) / self.in_std[d])
    }

    pub fn target(&self, t: &[f64; D]) -> [f64; D] {
        std::array::from_fn(|d| (t[d] - self.out_mean[d]) / self.out_std[d])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub length_unit: String,
    pub stress_unit: String,
    pub material: Option<Material>,
    /// Free-form training summary.
    pub training: Option<serde_json::Value>,
}

impl ModelMeta {
    pub fn with_material(material: Material) -> Self {
        Self { length_unit: "mm".into(), stress_unit: "MPa".into(), material: Some(material), training: None }
    }
}

/// One mixture component in physical units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub pi: f64,
    /// Interior controls in the canonical adapted frame (mm).
    pub shape: [f64; 12],
    /// Predicted aggregated stress (MPa).
    pub sigma: f64,
    /// Diagonal variances of `(shape, sigma)` (mm², MPa²).
    pub var: [f64; D],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmPrediction {
    pub modes: [Mode; K],
}

impl GmmPrediction {
    pub fn pi(&self) -> [f64; K] {
        [self.modes[0].pi, self.modes[1].pi]
    }
}

/// Output derivatives with respect to the physical input `p`.
#[derive(Clone, Debug)]
pub struct InputJacobian {
    pub prediction: GmmPrediction,
    /// `∂(raw outputs)/∂p`, `OUTPUTS × 18`.
    pub raw: DMatrix<f64>,
    out_std: Vec<f64>,
}

impl InputJacobian {
    /// `∂(shape, sigma)/∂p` of component `k` in physical units (13 × 18).
    pub fn mean(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(D, INPUTS, |d, i| self.out_std[d] * self.raw[(gmm::mean_index(k, d), i)])
    }

    /// `∂π/∂p` (K × 18).
    pub fn pi(&self) -> DMatrix<f64> {
        let pi = self.prediction.pi();
        DMatrix::from_fn(K, INPUTS, |k, i| {
            let avg: f64 = (0..K).map(|j| pi[j] * self.raw[(gmm::logit_index(j), i)]).sum();
            pi[k] * (self.raw[(gmm::logit_index(k), i)] - avg)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdnModel {
    pub params: Params,
    pub norm: Standardization,
    pub meta: ModelMeta,
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl MdnModel {
    /// Default architecture: 18 → 512, six residual blocks, 54 outputs.
    pub fn default_arch() -> Arch {
        Arch { inputs: INPUTS, hidden: 512, blocks: 6, outputs: OUTPUTS }
    }

    pub fn new(arch: Arch, seed: u64, norm: Standardization, meta: ModelMeta) -> Result<Self> {
        if arch.inputs != INPUTS || arch.outputs != OUTPUTS || arch.hidden == 0 {
            return Err(Error::Invalid(format!("architecture must map {INPUTS} inputs to {OUTPUTS} outputs")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self { params: Params::init(&arch, &mut rng), norm, meta })
    }

    pub fn arch(&self) -> Arch {
        self.params.arch()
    }

    /// Whether `p` lies inside the per-coordinate training range.
    pub fn in_domain(&self, p: &[f64; INPUTS]) -> bool {
        (0..INPUTS).all(|d| p[d] >= self.norm.in_min[d] && p[d] <= self.norm.in_max[d])
    }

    /// Standardized inputs as columns.
    pub fn input_matrix(&self, ps: &[[f64; INPUTS]]) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(INPUTS, ps.len());
        for (j, p) in ps.iter().enumerate() {
            x.column_mut(j).copy_from_slice(&self.norm.input(p));
        }
        x
    }

    /// Raw network outputs (OUTPUTS × n).
    pub fn raw_outputs(&self, ps: &[[f64; INPUTS]]) -> Result<DMatrix<f64>> {
        let y = net::forward(&self.params, &self.input_matrix(ps));
        check_finite(y.as_slice(), "network outputs")?;
        Ok(y)
    }

    fn to_physical(&self, y: &[f64]) -> GmmPrediction {
        let raw = gmm::decode(y);
        let n = &self.norm;
        let modes = std::array::from_fn(|k| {
            let m: [f64; D] = std::array::from_fn(|d| raw.mean[k][d] * n.out_std[d] + n.out_mean[d]);
            Mode {
                pi: raw.pi[k],
                shape: std::array::from_fn(|d| m[d]),
                sigma: m[12],
                var: std::array::from_fn(|d| raw.var[k][d] * n.out_std[d] * n.out_std[d]),
            }
        });
        GmmPrediction { modes }
    }

    pub fn forward(&self, p: &[f64; INPUTS]) -> Result<GmmPrediction> {
        Ok(self.forward_batch(std::slice::from_ref(p))?.remove(0))
    }

    pub fn forward_batch(&self, ps: &[[f64; INPUTS]]) -> Result<Vec<GmmPrediction>> {
        for p in ps {
            check_finite(p, "input")?;
        }
        let outside = ps.iter().filter(|p| !self.in_domain(p)).count();
        if outside > 0 {
            log::debug!("{outside} of {} surrogate inputs outside the training range", ps.len());
        }
        let y = self.raw_outputs(ps)?;
        Ok((0..ps.len()).map(|j| self.to_physical(y.column(j).as_slice())).collect())
    }

    pub fn input_jacobian(&self, p: &[f64; INPUTS]) -> Result<InputJacobian> {
        check_finite(p, "input")?;
        let x = DVector::from_column_slice(&self.norm.input(p));
        let (y, ty) = net::forward_tangent(&self.params, &x);
        check_finite(y.as_slice(), "network outputs")?;
        let mut raw = ty;
        for i in 0..INPUTS {
            raw.column_mut(i).scale_mut(1.0 / self.norm.in_std[i]);
        }
        Ok(InputJacobian { prediction: self.to_physical(y.as_slice()), raw, out_std: self.norm.out_std.clone() })
    }

    /// Mean NLL of standardized targets under the model (no weight penalty).
    pub fn mean_nll(&self, inputs: &[[f64; INPUTS]], targets: &[[f64; D]]) -> Result<f64> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::Invalid("need equally many, and at least one, inputs and targets".into()));
        }
        let mut total = 0.0;
        for (ci, ct) in inputs.chunks(4096).zip(targets.chunks(4096)) {
            let y = self.raw_outputs(ci)?;
            let mut t = DMatrix::zeros(D, ct.len());
            for (j, r) in ct.iter().enumerate() {
                t.column_mut(j).copy_from_slice(&self.norm.target(r));
            }
            total += gmm::batch_nll(&y, &t, None, 1.0);
        }
        Ok(total / inputs.len() as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.arch();
        let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
        let n = &self.norm;
        for (name, v) in [
            ("norm.in_mean", &n.in_mean),
            ("norm.in_std", &n.in_std),
            ("norm.out_mean", &n.out_mean),
            ("norm.out_std", &n.out_std),
            ("norm.in_min", &n.in_min),
            ("norm.in_max", &n.in_max),
        ] {
            tensors.push((name.to_string(), v.len(), 1, v.clone()));
        }
        for ((name, data, _), (r, c)) in self.params.tensors().into_iter().zip(Params::shapes(&arch)) {
            tensors.push((name, r, c, data.to_vec()));
        }
        let header = FileHeader {
            arch,
            meta: self.meta.clone(),
            tensors: tensors.iter().map(|(n, r, c, _)| TensorEntry { name: n.clone(), rows: *r, cols: *c }).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.write_u32::<LittleEndian>(MODEL_VERSION).expect("vec write");
        out.write_u64::<LittleEndian>(json.len() as u64).expect("vec write");
        out.extend_from_slice(&json);
        for (_, _, _, data) in &tensors {
            for v in data {
                out.write_f64::<LittleEndian>(*v).expect("vec write");
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let trunc = |_| Error::Format("model file is truncated".into());
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic).map_err(trunc)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format("not a model file".into()));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(trunc)?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let len = cur.read_u64::<LittleEndian>().map_err(trunc)? as usize;
        let start = cur.position() as usize;
        let json = bytes.get(start..start.saturating_add(len)).ok_or_else(|| Error::Format("model file is truncated".into()))?;
        let header: FileHeader = serde_json::from_slice(json).map_err(|e| Error::Format(format!("bad model header: {e}")))?;
        cur.set_position((start + len) as u64);
        let arch = header.arch;
        if arch.inputs != INPUTS || arch.outputs != OUTPUTS {
            return Err(Error::Format("model architecture does not match the 18 → 54 layout".into()));
        }
        let mut expected: Vec<(usize, usize)> = vec![(INPUTS, 1), (INPUTS, 1), (D, 1), (D, 1), (INPUTS, 1), (INPUTS, 1)];
        expected.extend(Params::shapes(&arch));
        let got: Vec<(usize, usize)> = header.tensors.iter().map(|t| (t.rows, t.cols)).collect();
        if got != expected {
            return Err(Error::Format("tensor manifest does not match the architecture".into()));
        }
        let mut data = Vec::with_capacity(got.len());
        for (r, c) in &got {
            let mut v = vec![0.0; r * c];
            cur.read_f64_into::<LittleEndian>(&mut v).map_err(trunc)?;
            data.push(v);
        }
        if (cur.position() as usize) != bytes.len() {
            return Err(Error::Format("trailing bytes after the model tensors".into()));
        }
        let mut it = data.into_iter();
        let mut next = || it.next().expect("manifest length checked");
        let norm = Standardization { in_mean: next(), in_std: next(), out_mean: next(), out_std: next(), in_min: next(), in_max: next() };
        let rest: Vec<Vec<f64>> = std::iter::from_fn(|| Some(next())).take(Params::shapes(&arch).len()).collect();
        let params = Params::from_flat(&arch, &rest).ok_or_else(|| Error::Format("tensor sizes do not match".into()))?;
        Ok(Self { params, norm, meta: header.meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct FileHeader {
    arch: Arch,
    meta: ModelMeta,
    tensors: Vec<TensorEntry>,
}
