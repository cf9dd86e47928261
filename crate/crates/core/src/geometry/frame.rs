//! Rigid-invariant frame built from the corner diagonals.

use crate::ad::{normalize, Real};
use nalgebra::{Matrix3, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptedFrame<T: Real = f64> {
    pub origin: Vector3<T>,
    /// x, y, z axes.
    pub axes: [Vector3<T>; 3],
}

/// Frame of corners in cyclic order `[c00, c30, c33, c03]`.
pub fn adapted_frame<T: Real>(corners: &[Vector3<T>; 4]) -> AdaptedFrame<T> {
    let origin = (corners[0] + corners[1] + corners[2] + corners[3]).map(|c| c * 0.25);
    let g0 = normalize(&(corners[2] - corners[0]));
    let g1 = normalize(&(corners[1] - corners[3]));
    let x = normalize(&(g0 + g1));
    let y = normalize(&(g1 - g0));
    let z = normalize(&g0.cross(&g1));
    AdaptedFrame { origin, axes: [x, y, z] }
}

impl<T: Real> AdaptedFrame<T> {
    pub fn to_local(&self, p: &Vector3<T>) -> Vector3<T> {
        let d = p - self.origin;
        Vector3::new(self.axes[0].dot(&d), self.axes[1].dot(&d), self.axes[2].dot(&d))
    }

    pub fn to_world(&self, q: &Vector3<T>) -> Vector3<T> {
        self.origin
            + self.axes[0].map(|c| c * q.x)
            + self.axes[1].map(|c| c * q.y)
            + self.axes[2].map(|c| c * q.z)
    }

    pub fn dir_to_local(&self, v: &Vector3<T>) -> Vector3<T> {
        Vector3::new(self.axes[0].dot(v), self.axes[1].dot(v), self.axes[2].dot(v))
    }
}

impl AdaptedFrame<f64> {
    /// Rows are the axes, so `rotation() * (p - origin)` is `to_local(p)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_rows(&[self.axes[0].transpose(), self.axes[1].transpose(), self.axes[2].transpose()])
    }
}

/// Checked frame: fails if the diagonals are (nearly) parallel or degenerate.
pub fn checked_frame(corners: &[Vector3<f64>; 4]) -> crate::Result<AdaptedFrame<f64>> {
    let d0 = corners[2] - corners[0];
    let d1 = corners[1] - corners[3];
    let scale = d0.norm().max(d1.norm());
    if scale == 0.0 || d0.cross(&d1).norm() < 1e-10 * scale * scale {
        return Err(crate::Error::invalid("degenerate corners: diagonals are parallel or collapsed"));
    }
    Ok(adapted_frame(corners))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_are_orthonormal_and_normal_to_diagonals() {
        let c = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(310.0, 12.0, 4.0),
            Vector3::new(350.0, 260.0, -30.0),
            Vector3::new(20.0, 240.0, 11.0),
        ];
        let f = checked_frame(&c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((f.axes[i].dot(&f.axes[j]) - want).abs() < 1e-12);
            }
        }
        let g0 = (c[2] - c[0]).normalize();
        let g1 = (c[1] - c[3]).normalize();
        assert!(f.axes[2].dot(&g0).abs() < 1e-12 && f.axes[2].dot(&g1).abs() < 1e-12);
        assert!((f.axes[0].cross(&f.axes[1]) - f.axes[2]).norm() < 1e-12);
        let p = Vector3::new(3.0, -4.0, 5.0);
        assert!((f.to_world(&f.to_local(&p)) - p).norm() < 1e-12);
    }
}
