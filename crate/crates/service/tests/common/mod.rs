#![allow(dead_code)]

use coldbend_core::geometry::{compact_decode, encode_panel, CompactBoundary, QuadBaseMesh};
use coldbend_core::P3;
use coldbend_design::Surrogate;
use coldbend_service::protocol::{MeshSource, SessionOptions};
use coldbend_service::{Model, Session};
use coldbend_surrogate::gmm::D;
use coldbend_surrogate::{GmmPrediction, Mode, INPUTS};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Predicts the zero-twist interior for both components and a stress
/// proportional to the corner twist, so planar panels are stress free.
pub struct TwistStress {
    pub in_domain: bool,
}

fn shape_and_sigma(p: &[f64; INPUTS]) -> Option<([f64; 12], f64)> {
    let b = compact_decode(&CompactBoundary { p: *p }).ok()?;
    let (_, z) = encode_panel(&b, &b.zero_twist_patch()).ok()?;
    let frame = b.frame().ok()?;
    let twist = b.corners.iter().map(|c| frame.to_local(c).z.abs()).fold(0.0, f64::max);
    let size = (b.corners[2] - b.corners[0]).norm();
    Some((z, 4000.0 * twist / size))
}

fn prediction(z: [f64; 12], sigma: f64) -> GmmPrediction {
    let mode = |pi, s| Mode { pi, shape: z, sigma: s, var: [1.0; D] };
    GmmPrediction { modes: [mode(0.6, sigma), mode(0.4, 1.3 * sigma)] }
}

impl Surrogate for TwistStress {
    fn predict(&self, ps: &[[f64; INPUTS]]) -> coldbend_design::Result<Vec<GmmPrediction>> {
        ps.iter()
            .map(|p| {
                let (z, s) = shape_and_sigma(p).ok_or_else(|| coldbend_design::Error::Invalid("bad boundary".into()))?;
                Ok(prediction(z, s))
            })
            .collect()
    }

    fn predict_with_jacobian(&self, p: &[f64; INPUTS]) -> coldbend_design::Result<(GmmPrediction, Vec<DMatrix<f64>>)> {
        let value = |q: &[f64; INPUTS]| {
            shape_and_sigma(q).map(|(z, s)| {
                let mut y = z.to_vec();
                y.push(s);
                y
            })
        };
        let y0 = value(p).ok_or_else(|| coldbend_design::Error::Invalid("bad boundary".into()))?;
        let mut j0 = DMatrix::zeros(D, INPUTS);
        for i in 0..INPUTS {
            let h = 1e-6 * (1.0 + p[i].abs());
            let (mut a, mut b) = (*p, *p);
            a[i] += h;
            b[i] -= h;
            let col: Vec<f64> = match (value(&a), value(&b)) {
                (Some(ya), Some(yb)) => ya.iter().zip(&yb).map(|(x, y)| (x - y) / (2.0 * h)).collect(),
                (Some(ya), None) => ya.iter().zip(&y0).map(|(x, y)| (x - y) / h).collect(),
                (None, Some(yb)) => y0.iter().zip(&yb).map(|(x, y)| (x - y) / h).collect(),
                (None, None) => vec![0.0; D],
            };
            for (d, v) in col.into_iter().enumerate() {
                j0[(d, i)] = v;
            }
        }
        let mut j1 = j0.clone();
        for i in 0..INPUTS {
            j1[(12, i)] *= 1.3;
        }
        let mut z = [0.0; 12];
        z.copy_from_slice(&y0[..12]);
        Ok((prediction(z, y0[12]), vec![j0, j1]))
    }

    fn in_domain(&self, _: &[f64; INPUTS]) -> bool {
        self.in_domain
    }
}

pub fn model() -> Model {
    Arc::new(TwistStress { in_domain: true })
}

pub fn grid_obj(n: usize, h: f64, z: impl Fn(f64, f64) -> f64) -> String {
    QuadBaseMesh::grid(n, n, |i, j| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        P3::new(x, y, z(x, y))
    })
    .unwrap()
    .to_obj()
}

pub fn planar_obj(n: usize) -> String {
    grid_obj(n, 250.0, |_, _| 0.0)
}

/// Grid on `z = (x - c)(y - c) / r`, every quad twisted.
pub fn saddle_obj(n: usize) -> String {
    let c = n as f64 * 250.0 / 2.0;
    grid_obj(n, 250.0, move |x, y| (x - c) * (y - c) / 1500.0)
}

pub fn session(obj: &str) -> Session {
    let mesh = coldbend_service::session::load_mesh(&MeshSource::Obj { text: obj.into() }).unwrap();
    Session::create(1, &mesh, model(), None, None, SessionOptions::default()).unwrap()
}
