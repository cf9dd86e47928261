//! Per-face geometry: the surrogate input `p` and the predicted patch normals
//! at the four edge midpoints, as functions of the 32 face unknowns.
//!
//! Face unknowns are laid out as corners (12), `s` per slot (12) and the slot
//! angles `(start, end)` (8), all in the face's own traversal order.

use crate::surrogate::Surrogate;
use crate::Result;
use coldbend_core::ad::{normalize, value, Dual, Real};
use coldbend_core::geometry::boundary::{assemble_net, curves_generic};
use coldbend_core::geometry::compact::{encode_canonical, needs_transpose, relabel};
use coldbend_core::geometry::frame::adapted_frame;
use coldbend_core::geometry::patch::{eval_net, Net};
use coldbend_core::geometry::BezierPatch;
use coldbend_core::P3;
use coldbend_surrogate::GmmPrediction;
use nalgebra::{DMatrix, SMatrix, Vector3};

pub const NX: usize = 32;
const NZ: usize = NX + 12;

/// Parameter values of the four edge midpoints, slot by slot.
pub const MIDPOINTS: [(f64, f64); 4] = [(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)];

fn unpack<T: Real>(x: &[T; NX]) -> ([Vector3<T>; 4], [Vector3<T>; 4], [T; 8]) {
    let v = |i: usize| Vector3::new(x[i], x[i + 1], x[i + 2]);
    let corners = std::array::from_fn(|k| v(3 * k));
    let s = std::array::from_fn(|k| v(12 + 3 * k));
    let theta = std::array::from_fn(|i| x[24 + i]);
    (corners, s, theta)
}

/// Whether the canonical labeling transposes this face.
pub fn transposes(x: &[f64; NX]) -> bool {
    let (c, _, _) = unpack(x);
    needs_transpose(&c)
}

/// Rigid-invariant surrogate input of the face.
pub fn face_p<T: Real>(x: &[T; NX], transpose: bool) -> [T; 18] {
    let (c, s, t) = unpack(x);
    let (c, s, t) = relabel(&c, &s, &t, transpose);
    encode_canonical(&c, &s, &t).0
}

/// Bézier net of the face in its own labeling, with interior controls `zeta`
/// given in the adapted frame of the canonical labeling.
pub fn face_net<T: Real>(x: &[T; NX], zeta: &[T; 12], transpose: bool) -> Net<T> {
    let (c, s, t) = unpack(x);
    let (cc, _, _) = relabel(&c, &s, &t, transpose);
    let frame = adapted_frame(&cc);
    let mut interior: [Vector3<T>; 4] =
        std::array::from_fn(|k| frame.to_world(&Vector3::new(zeta[3 * k], zeta[3 * k + 1], zeta[3 * k + 2])));
    if transpose {
        interior.swap(1, 2);
    }
    assemble_net(&curves_generic(&c, &s, &t), &interior)
}

/// Unit patch normals at the four edge midpoints.
pub fn face_normals<T: Real>(x: &[T; NX], zeta: &[T; 12], transpose: bool) -> [Vector3<T>; 4] {
    let net = face_net(x, zeta, transpose);
    MIDPOINTS.map(|(u, v)| {
        let [_, su, sv] = eval_net(&net, u, v);
        normalize(&su.cross(&sv))
    })
}

/// Predicted face quantities without derivatives.
#[derive(Clone, Debug)]
pub struct FaceValues {
    pub p: [f64; 18],
    pub transpose: bool,
    pub prediction: GmmPrediction,
}

impl FaceValues {
    pub fn normals(&self, x: &[f64; NX], mode: usize) -> [P3; 4] {
        face_normals(x, &self.prediction.modes[mode].shape, self.transpose)
    }

    /// Predicted panel of component `mode` in world coordinates.
    pub fn patch(&self, x: &[f64; NX], mode: usize) -> BezierPatch {
        BezierPatch::new(face_net(x, &self.prediction.modes[mode].shape, self.transpose))
    }
}

pub fn face_inputs(xs: &[[f64; NX]]) -> Vec<([f64; 18], bool)> {
    xs.iter()
        .map(|x| {
            let t = transposes(x);
            (face_p(x, t), t)
        })
        .collect()
}

/// Batched prediction for all faces.
pub fn face_values(model: &dyn Surrogate, xs: &[[f64; NX]]) -> Result<Vec<FaceValues>> {
    let inputs = face_inputs(xs);
    let ps: Vec<[f64; 18]> = inputs.iter().map(|i| i.0).collect();
    let preds = model.predict(&ps)?;
    Ok(inputs.into_iter().zip(preds).map(|((p, transpose), prediction)| FaceValues { p, transpose, prediction }).collect())
}

/// A face linearized for one mixture component.
#[derive(Clone, Debug)]
pub struct FaceJacobian {
    pub values: FaceValues,
    pub mode: usize,
    /// `∂p/∂x`.
    pub dp: SMatrix<f64, 18, NX>,
    pub sigma: f64,
    /// Total `∂σ/∂x` through the surrogate.
    pub dsigma: [f64; NX],
    pub normals: [P3; 4],
    /// Total `∂n/∂x` per slot, including the dependence of the predicted
    /// interior on `p`.
    pub dnormals: [SMatrix<f64, 3, NX>; 4],
}

pub fn linearize_face(model: &dyn Surrogate, x: &[f64; NX], mode: usize) -> Result<FaceJacobian> {
    let transpose = transposes(x);
    let xd: [Dual<NX>; NX] = std::array::from_fn(|i| Dual::var(x[i], i));
    let pd = face_p(&xd, transpose);
    let p: [f64; 18] = pd.map(|d| d.v);
    let dp = SMatrix::<f64, 18, NX>::from_fn(|r, c| pd[r].d[c]);
    let (prediction, jac) = model.predict_with_jacobian(&p)?;
    let m = &prediction.modes[mode];
    let jm: &DMatrix<f64> = &jac[mode];
    // shape and σ rows of the chain
    let dz_dp = SMatrix::<f64, 12, 18>::from_fn(|r, c| jm[(r, c)]);
    let dz_dx = dz_dp * dp;
    let ds_dp = SMatrix::<f64, 1, 18>::from_fn(|_, c| jm[(12, c)]);
    let dsx = ds_dp * dp;

    let xz: [Dual<NZ>; NX] = std::array::from_fn(|i| Dual::var(x[i], i));
    let zz: [Dual<NZ>; 12] = std::array::from_fn(|i| Dual::var(m.shape[i], NX + i));
    let nd = face_normals(&xz, &zz, transpose);
    let normals = nd.map(|n| value(&n));
    let dnormals = nd.map(|n| {
        let dx = SMatrix::<f64, 3, NX>::from_fn(|r, c| n[r].d[c]);
        let dz = SMatrix::<f64, 3, 12>::from_fn(|r, c| n[r].d[NX + c]);
        dx + dz * dz_dx
    });
    Ok(FaceJacobian {
        sigma: m.sigma,
        values: FaceValues { p, transpose, prediction },
        mode,
        dp,
        dsigma: std::array::from_fn(|c| dsx[(0, c)]),
        normals,
        dnormals,
    })
}
