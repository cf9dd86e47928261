//! Bicubic tensor-product Bézier patches.

use crate::ad::Real;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub type Net<T> = [[Vector3<T>; 4]; 4];

/// Cubic Bernstein basis and its first derivative at `t`.
pub fn bernstein(t: f64) -> ([f64; 4], [f64; 4]) {
    let s = 1.0 - t;
    (
        [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t],
        [-3.0 * s * s, 3.0 * s * s - 6.0 * t * s, 6.0 * t * s - 3.0 * t * t, 3.0 * t * t],
    )
}

/// Position and parametric derivatives of the net `c[i][j]` at `(u, v)`,
/// with `i` the `u` index.
pub fn eval_net<T: Real>(c: &Net<T>, u: f64, v: f64) -> [Vector3<T>; 3] {
    let (bu, du) = bernstein(u);
    let (bv, dv) = bernstein(v);
    let mut p = Vector3::zeros();
    let mut pu = Vector3::zeros();
    let mut pv = Vector3::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let cij = &c[i][j];
            p += cij.map(|x| x * (bu[i] * bv[j]));
            pu += cij.map(|x| x * (du[i] * bv[j]));
            pv += cij.map(|x| x * (bu[i] * dv[j]));
        }
    }
    [p, pu, pv]
}

pub fn map_net<A: Real, B: Real>(c: &Net<A>, f: impl Fn(&Vector3<A>) -> Vector3<B>) -> Net<B> {
    std::array::from_fn(|i| std::array::from_fn(|j| f(&c[i][j])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchPoint {
    pub position: Vector3<f64>,
    pub du: Vector3<f64>,
    pub dv: Vector3<f64>,
    pub normal: Vector3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BezierPatch {
    /// `ctrl[i][j]` is `c_ij`; `i` runs along `u`.
    pub ctrl: Net<f64>,
}

impl BezierPatch {
    pub fn new(ctrl: Net<f64>) -> Self {
        Self { ctrl }
    }

    pub fn eval(&self, u: f64, v: f64) -> crate::Result<PatchPoint> {
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(crate::Error::invalid(format!("parameter ({u}, {v}) outside the unit square")));
        }
        let [position, du, dv] = eval_net(&self.ctrl, u, v);
        let n = du.cross(&dv);
        let len = n.norm();
        if len < 1e-12 {
            return Err(crate::Error::numerical(format!("degenerate patch tangents at ({u}, {v})")));
        }
        Ok(PatchPoint { position, du, dv, normal: n / len })
    }

    pub fn position(&self, u: f64, v: f64) -> Vector3<f64> {
        eval_net(&self.ctrl, u, v)[0]
    }

    /// The four interior controls in the fixed order `c11, c12, c21, c22`.
    pub fn interior(&self) -> [Vector3<f64>; 4] {
        INTERIOR.map(|(i, j)| self.ctrl[i][j])
    }

    pub fn set_interior(&mut self, pts: &[Vector3<f64>; 4]) {
        for (k, &(i, j)) in INTERIOR.iter().enumerate() {
            self.ctrl[i][j] = pts[k];
        }
    }

    /// Swaps the parameter directions (`c_ij -> c_ji`).
    pub fn transposed(&self) -> Self {
        Self { ctrl: std::array::from_fn(|i| std::array::from_fn(|j| self.ctrl[j][i])) }
    }

    /// Grid of `(n+1)²` positions, row-major in `v` then `u`, plus quads.
    pub fn tessellate(&self, n: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 4]>) {
        let n = n.max(1);
        let mut pts = Vec::with_capacity((n + 1) * (n + 1));
        for b in 0..=n {
            for a in 0..=n {
                pts.push(self.position(a as f64 / n as f64, b as f64 / n as f64));
            }
        }
        let mut quads = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                let k = b * (n + 1) + a;
                quads.push([k, k + 1, k + n + 2, k + n + 1]);
            }
        }
        (pts, quads)
    }
}

/// Index pairs `(i, j)` of the interior controls in storage order.
pub const INTERIOR: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

#[cfg(test)]
mod tests {
    use super::*;

    fn wavy() -> BezierPatch {
        BezierPatch::new(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let (x, y) = (i as f64 * 100.0, j as f64 * 90.0 + 7.0 * i as f64);
                Vector3::new(x, y, ((i * 7 + j * 3) % 5) as f64 * 6.0 - 10.0)
            })
        }))
    }

    #[test]
    fn corners_interpolate_exactly() {
        let p = wavy();
        assert_eq!(p.position(0.0, 0.0), p.ctrl[0][0]);
        assert_eq!(p.position(1.0, 0.0), p.ctrl[3][0]);
        assert_eq!(p.position(1.0, 1.0), p.ctrl[3][3]);
        assert_eq!(p.position(0.0, 1.0), p.ctrl[0][3]);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let p = wavy();
        let h = 1e-6;
        for &(u, v) in &[(0.3, 0.6), (0.5, 0.5), (0.9, 0.1)] {
            let pt = p.eval(u, v).unwrap();
            let fu = (p.position(u + h, v) - p.position(u - h, v)) / (2.0 * h);
            let fv = (p.position(u, v + h) - p.position(u, v - h)) / (2.0 * h);
            assert!((pt.du - fu).norm() <= 1e-6 * fu.norm());
            assert!((pt.dv - fv).norm() <= 1e-6 * fv.norm());
        }
    }

    #[test]
    fn planar_patch_has_constant_normal() {
        let mut p = wavy();
        for row in p.ctrl.iter_mut() {
            for c in row.iter_mut() {
                c.z = 0.25 * c.x - 0.1 * c.y;
            }
        }
        let n0 = p.eval(0.0, 0.0).unwrap().normal;
        for k in 0..=10 {
            let n = p.eval(k as f64 / 10.0, 1.0 - k as f64 / 10.0).unwrap().normal;
            assert!((n - n0).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_tangents_are_reported() {
        let p = BezierPatch::new([[Vector3::zeros(); 4]; 4]);
        assert!(p.eval(0.5, 0.5).is_err());
    }
}
