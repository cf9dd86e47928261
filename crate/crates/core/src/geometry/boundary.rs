//! Panel boundaries: four corners and one edge plane plus two tangent angles
//! per edge.
//!
//! Corners are stored cyclically as `[c00, c30, c33, c03]`. Edge `k` runs from
//! corner `k` to corner `k+1`, so edge 0 is the `v = 0` curve, edge 1 the
//! `u = 1` curve, edge 2 the `v = 1` curve traversed backwards and edge 3 the
//! `u = 0` curve traversed backwards. Each edge stores `θ` at its start and end.

use super::curve::boundary_curve;
use super::frame::{checked_frame, AdaptedFrame};
use super::patch::{BezierPatch, Net, INTERIOR};
use crate::ad::Real;
use crate::P3;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Maximal admissible tangent angle of the training domain.
pub const THETA_MAX: f64 = 5.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurveParams {
    pub s: P3,
    pub theta: [f64; 2],
}

impl EdgeCurveParams {
    pub fn reversed(&self) -> Self {
        Self { s: self.s, theta: [self.theta[1], self.theta[0]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelBoundary {
    pub corners: [P3; 4],
    pub edges: [EdgeCurveParams; 4],
}

/// The four curves' control points, generic over the scalar type.
pub fn curves_generic<T: Real>(
    corners: &[Vector3<T>; 4],
    s: &[Vector3<T>; 4],
    theta: &[T; 8],
) -> [[Vector3<T>; 4]; 4] {
    std::array::from_fn(|k| {
        boundary_curve(&corners[k], &corners[(k + 1) % 4], &s[k], theta[2 * k], theta[2 * k + 1])
    })
}

/// Places the four curves and the interior controls into a net.
pub fn assemble_net<T: Real>(curves: &[[Vector3<T>; 4]; 4], interior: &[Vector3<T>; 4]) -> Net<T> {
    let mut c = [[Vector3::zeros(); 4]; 4];
    for t in 0..4 {
        c[t][0] = curves[0][t];
        c[3][t] = curves[1][t];
        c[3 - t][3] = curves[2][t];
        c[0][3 - t] = curves[3][t];
    }
    for (k, &(i, j)) in INTERIOR.iter().enumerate() {
        c[i][j] = interior[k];
    }
    c
}

/// Interior controls with zero twist at all four corners.
pub fn zero_twist_interior<T: Real>(c: &Net<T>) -> [Vector3<T>; 4] {
    let c11 = c[1][0] + c[0][1] - c[0][0];
    let c21 = c[2][0] + c[3][1] - c[3][0];
    let c12 = c[0][2] + c[1][3] - c[0][3];
    let c22 = c[2][3] + c[3][2] - c[3][3];
    // storage order c11, c12, c21, c22
    [c11, c12, c21, c22]
}

impl PanelBoundary {
    pub fn new(corners: [P3; 4], edges: [EdgeCurveParams; 4]) -> Self {
        Self { corners, edges }
    }

    /// Straight edges with each edge plane containing the face normal.
    pub fn straight(corners: [P3; 4]) -> crate::Result<Self> {
        let frame = checked_frame(&corners)?;
        let b = frame.axes[2];
        let edges = std::array::from_fn(|k| {
            let e = (corners[(k + 1) % 4] - corners[k]).normalize();
            let s = (b - e * b.dot(&e)).normalize();
            EdgeCurveParams { s, theta: [0.0, 0.0] }
        });
        Ok(Self { corners, edges })
    }

    pub fn edge_dir(&self, k: usize) -> P3 {
        (self.corners[(k + 1) % 4] - self.corners[k]).normalize()
    }

    pub fn validate(&self) -> crate::Result<()> {
        for k in 0..4 {
            for l in k + 1..4 {
                if (self.corners[k] - self.corners[l]).norm() < 1e-9 {
                    return Err(crate::Error::invalid(format!("corners {k} and {l} coincide")));
                }
            }
        }
        for (k, e) in self.edges.iter().enumerate() {
            if (e.s.norm() - 1.0).abs() > 1e-9 {
                return Err(crate::Error::invalid(format!("edge {k}: s_e is not a unit vector")));
            }
            if e.s.dot(&self.edge_dir(k)).abs() > 1e-9 {
                return Err(crate::Error::invalid(format!("edge {k}: s_e is not orthogonal to the edge")));
            }
            if e.theta.iter().any(|t| !t.is_finite()) {
                return Err(crate::Error::invalid(format!("edge {k}: non-finite tangent angle")));
            }
        }
        checked_frame(&self.corners)?;
        Ok(())
    }

    pub fn s_vectors(&self) -> [P3; 4] {
        self.edges.map(|e| e.s)
    }

    pub fn thetas(&self) -> [f64; 8] {
        std::array::from_fn(|i| self.edges[i / 2].theta[i % 2])
    }

    pub fn max_abs_theta(&self) -> f64 {
        self.thetas().iter().fold(0.0f64, |m, t| m.max(t.abs()))
    }

    pub fn curves(&self) -> [[P3; 4]; 4] {
        curves_generic(&self.corners, &self.s_vectors(), &self.thetas())
    }

    pub fn frame(&self) -> crate::Result<AdaptedFrame> {
        checked_frame(&self.corners)
    }

    /// `det(c03 - c00, c30 - c00, c33 - c00)`.
    pub fn orientation_det(&self) -> f64 {
        let [c00, c30, c33, c03] = self.corners;
        Matrix3::from_columns(&[c03 - c00, c30 - c00, c33 - c00]).determinant()
    }

    /// Swaps the roles of `u` and `v` (c03 <-> c30).
    pub fn transposed(&self) -> Self {
        let c = self.corners;
        let e = self.edges;
        Self {
            corners: [c[0], c[3], c[2], c[1]],
            edges: [e[3].reversed(), e[2].reversed(), e[1].reversed(), e[0].reversed()],
        }
    }

    /// Relabels so corner `k+1` becomes corner `k`.
    pub fn shifted(&self) -> Self {
        let c = self.corners;
        let e = self.edges;
        Self { corners: [c[1], c[2], c[3], c[0]], edges: [e[1], e[2], e[3], e[0]] }
    }

    /// Applies `x -> r x + t` to all geometry (`r` may be a reflection).
    pub fn transformed(&self, r: &Matrix3<f64>, t: &P3) -> Self {
        Self {
            corners: self.corners.map(|c| r * c + t),
            edges: self.edges.map(|e| EdgeCurveParams { s: r * e.s, theta: e.theta }),
        }
    }

    pub fn net(&self, interior: &[P3; 4]) -> Net<f64> {
        assemble_net(&self.curves(), interior)
    }

    pub fn patch(&self, interior: &[P3; 4]) -> BezierPatch {
        BezierPatch::new(self.net(interior))
    }

    pub fn zero_twist_patch(&self) -> BezierPatch {
        let mut net = self.net(&[P3::zeros(); 4]);
        let int = zero_twist_interior(&net);
        for (k, &(i, j)) in INTERIOR.iter().enumerate() {
            net[i][j] = int[k];
        }
        BezierPatch::new(net)
    }
}

/// Relabeling of a net matching [`PanelBoundary::shifted`]: new `c_ij` is old `c_(3-j) i`.
pub fn shift_net<T: Real>(c: &Net<T>) -> Net<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| c[3 - j][i]))
}

pub fn transpose_net<T: Real>(c: &Net<T>) -> Net<T> {
    std::array::from_fn(|i| std::array::from_fn(|j| c[j][i]))
}
