#![allow(dead_code)]

use coldbend_core::geometry::{compact_decode, encode_panel, CompactBoundary, QuadBaseMesh};
use coldbend_core::P3;
use coldbend_design::face::face_inputs;
use coldbend_design::{DesignState, Surrogate, Topology};
use coldbend_surrogate::gmm::D;
use coldbend_surrogate::net::Arch;
use coldbend_surrogate::{GmmPrediction, MdnModel, Mode, ModelMeta, Standardization, INPUTS};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Predicts the zero-twist interior of the boundary in both components, with
/// a stress given by `sigma(p)`; derivatives by central differences.
pub struct ZeroTwist {
    pub sigma: fn(&[f64; INPUTS]) -> f64,
}

pub fn zero_twist_shape(p: &[f64; INPUTS]) -> [f64; 12] {
    let b = compact_decode(&CompactBoundary { p: *p }).unwrap();
    encode_panel(&b, &b.zero_twist_patch()).unwrap().1
}

fn mode(pi: f64, shape: [f64; 12], sigma: f64) -> Mode {
    Mode { pi, shape, sigma, var: [1.0; D] }
}

impl ZeroTwist {
    pub fn constant_50() -> Self {
        Self { sigma: |_| 50.0 }
    }

    fn one(&self, p: &[f64; INPUTS]) -> GmmPrediction {
        let z = zero_twist_shape(p);
        let s = (self.sigma)(p);
        GmmPrediction { modes: [mode(0.7, z, s), mode(0.3, z, s)] }
    }
}

impl Surrogate for ZeroTwist {
    fn predict(&self, ps: &[[f64; INPUTS]]) -> coldbend_design::Result<Vec<GmmPrediction>> {
        Ok(ps.iter().map(|p| self.one(p)).collect())
    }

    fn predict_with_jacobian(&self, p: &[f64; INPUTS]) -> coldbend_design::Result<(GmmPrediction, Vec<DMatrix<f64>>)> {
        let value = |q: &[f64; INPUTS]| {
            compact_decode(&CompactBoundary { p: *q }).ok().map(|_| {
                let m = self.one(q).modes[0].clone();
                let mut y = m.shape.to_vec();
                y.push(m.sigma);
                y
            })
        };
        let y0 = value(p).expect("boundary outside the embeddable set");
        let mut j = DMatrix::zeros(D, INPUTS);
        for i in 0..INPUTS {
            let h = 1e-6 * (1.0 + p[i].abs());
            let (mut a, mut b) = (*p, *p);
            a[i] += h;
            b[i] -= h;
            // planar boundaries sit on the edge of the embeddable set, so
            // fall back to the one-sided difference that stays inside
            let col: Vec<f64> = match (value(&a), value(&b)) {
                (Some(ya), Some(yb)) => ya.iter().zip(&yb).map(|(x, y)| (x - y) / (2.0 * h)).collect(),
                (Some(ya), None) => ya.iter().zip(&y0).map(|(x, y)| (x - y) / h).collect(),
                (None, Some(yb)) => y0.iter().zip(&yb).map(|(x, y)| (x - y) / h).collect(),
                (None, None) => vec![0.0; D],
            };
            for (d, v) in col.into_iter().enumerate() {
                j[(d, i)] = v;
            }
        }
        Ok((self.one(p), vec![j.clone(), j]))
    }

    fn in_domain(&self, _: &[f64; INPUTS]) -> bool {
        true
    }
}

/// Small random network whose standardization is fitted to the faces of
/// `states`, so their inputs lie in its domain.
pub fn tiny_mdn(states: &[DesignState], seed: u64) -> MdnModel {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for st in states {
        let topo = st.topology().unwrap();
        let xs: Vec<_> = (0..topo.faces.len()).map(|f| st.face_local(&topo, f)).collect();
        for (p, _) in face_inputs(&xs) {
            let z = zero_twist_shape(&p);
            let mut t = [0.0; D];
            t[..12].copy_from_slice(&z);
            t[12] = 40.0;
            // widen the box so small perturbations stay inside
            for _ in 0..2 {
                let mut q = p;
                for x in q.iter_mut() {
                    *x *= 1.0 + 0.05 * (rng.random::<f64>() - 0.5);
                }
                q[10..].iter_mut().for_each(|x| *x += 0.02 * (rng.random::<f64>() - 0.5));
                q[6..10].iter_mut().for_each(|x| *x += 0.1 * (rng.random::<f64>() - 0.5));
                inputs.push(q);
                let mut tt = t;
                tt.iter_mut().for_each(|x| *x += 5.0 * (rng.random::<f64>() - 0.5));
                targets.push(tt);
            }
        }
    }
    let norm = Standardization::fit(&inputs, &targets);
    let arch = Arch { inputs: INPUTS, hidden: 24, blocks: 2, outputs: coldbend_surrogate::gmm::OUTPUTS };
    MdnModel::new(arch, seed, norm, ModelMeta::default()).unwrap()
}

/// Planar grid in the xy plane.
pub fn planar_grid(n: usize, h: f64) -> QuadBaseMesh {
    QuadBaseMesh::grid(n, n, |i, j| P3::new(i as f64 * h, j as f64 * h, 0.0)).unwrap()
}

/// Grid on `z = x y / r`, so every quad is twisted.
pub fn saddle_grid(n: usize, h: f64, r: f64) -> QuadBaseMesh {
    let c = n as f64 * h / 2.0;
    QuadBaseMesh::grid(n, n, |i, j| {
        let (x, y) = (i as f64 * h - c, j as f64 * h - c);
        P3::new(x, y, x * y / r)
    })
    .unwrap()
}

/// Grid on a cylinder of radius `r` around the y axis: the `i` lines are
/// circular arcs, the `j` lines straight.
pub fn cylinder_grid(n: usize, h: f64, r: f64) -> QuadBaseMesh {
    QuadBaseMesh::grid(n, n, |i, j| {
        let a = (i as f64 - n as f64 / 2.0) * h / r;
        P3::new(r * a.sin(), j as f64 * h, r * (1.0 - a.cos()))
    })
    .unwrap()
}

/// Three quads around a valence-3 interior vertex, subdivided once and
/// lifted onto a gentle dome.
pub fn star_mesh(size: f64) -> QuadBaseMesh {
    let mut v = vec![P3::zeros()];
    for k in 0..6 {
        let a = std::f64::consts::PI / 3.0 * k as f64;
        let r = if k % 2 == 0 { size } else { size * 1.1 };
        v.push(P3::new(r * a.cos(), r * a.sin(), 0.0));
    }
    let faces = vec![vec![0, 1, 2, 3], vec![0, 3, 4, 5], vec![0, 5, 6, 1]];
    let m = QuadBaseMesh::from_polygons(v, &faces).unwrap().catmull_clark().unwrap();
    let verts = m.vertices.iter().map(|p| P3::new(p.x, p.y, -(p.x * p.x + p.y * p.y) / (8.0 * size))).collect();
    QuadBaseMesh::new(verts, m.faces.clone()).unwrap()
}

/// Random perturbation of every design variable.
pub fn jitter(state: &mut DesignState, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |s: f64| s * (2.0 * rng.random::<f64>() - 1.0);
    for v in &mut state.vertices {
        *v += P3::new(r(scale), r(scale), r(scale));
    }
    for s in &mut state.s {
        *s = (*s + P3::new(r(0.05), r(0.05), r(0.05))) * (1.0 + r(0.02));
    }
    for t in &mut state.theta {
        *t = [r(0.07), r(0.07)];
    }
    for u in &mut state.u_face {
        *u = r(3.0);
    }
    for u in &mut state.u_theta {
        *u = [r(0.05), r(0.05)];
    }
}

pub fn topo(state: &DesignState) -> Topology {
    state.topology().unwrap()
}
