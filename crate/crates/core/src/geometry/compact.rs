//! Rigid-invariant 18-vector `p = (d, γ, θ)` of a panel boundary.
//!
//! `d` holds the squared corner distances in the order
//! `c00c03, c00c30, c00c33, c03c30, c03c33, c30c33`; `γ` the four edge-plane
//! inclinations; `θ` the eight tangent angles, edge by edge (start, end).

use super::boundary::{EdgeCurveParams, PanelBoundary};
use super::frame::{adapted_frame, checked_frame};
use super::patch::{BezierPatch, INTERIOR};
use crate::ad::{normalize, Real};
use crate::P3;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Corner index pairs (into `[c00, c30, c33, c03]`) for the entries of `d`.
pub const DIST_PAIRS: [(usize, usize); 6] = [(0, 3), (0, 1), (0, 2), (3, 1), (3, 2), (1, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactBoundary {
    pub p: [f64; 18],
}

impl CompactBoundary {
    pub fn d(&self) -> &[f64] {
        &self.p[0..6]
    }
    pub fn gamma(&self) -> &[f64] {
        &self.p[6..10]
    }
    pub fn theta(&self) -> &[f64] {
        &self.p[10..18]
    }

    /// Whether `p` lies in the sampled training domain (γ range and |θ| ≤ 5°).
    pub fn in_angle_domain(&self, theta_max: f64) -> bool {
        self.gamma().iter().all(|g| g.abs() <= FRAC_PI_2 + 1e-12)
            && self.theta().iter().all(|t| t.abs() <= theta_max + 1e-12)
    }
}

/// Which discrete choices the encoder made.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncodeInfo {
    /// Labels were transposed to reach a non-negative orientation determinant.
    pub transposed: bool,
    /// Per canonical edge, `s_e` was negated (θ's negated) to bring γ into range.
    pub flipped: [bool; 4],
}

/// Canonical relabeling of raw arrays. Returns `(corners, s, theta)` after
/// transposition if `transpose` is set.
pub fn relabel<T: Real>(
    corners: &[Vector3<T>; 4],
    s: &[Vector3<T>; 4],
    theta: &[T; 8],
    transpose: bool,
) -> ([Vector3<T>; 4], [Vector3<T>; 4], [T; 8]) {
    if !transpose {
        return (*corners, *s, *theta);
    }
    let c = [corners[0], corners[3], corners[2], corners[1]];
    let sv = [s[3], s[2], s[1], s[0]];
    let th = [theta[7], theta[6], theta[5], theta[4], theta[3], theta[2], theta[1], theta[0]];
    (c, sv, th)
}

pub fn needs_transpose(corners: &[P3; 4]) -> bool {
    let [c00, c30, c33, c03] = *corners;
    Matrix3::from_columns(&[c03 - c00, c30 - c00, c33 - c00]).determinant() < 0.0
}

/// Encodes already-canonical arrays. `s` need not be unit or exactly
/// orthogonal: only its direction about the edge matters.
pub fn encode_canonical<T: Real>(
    corners: &[Vector3<T>; 4],
    s: &[Vector3<T>; 4],
    theta: &[T; 8],
) -> ([T; 18], [bool; 4]) {
    let mut p = [T::cst(0.0); 18];
    for (k, &(a, b)) in DIST_PAIRS.iter().enumerate() {
        let d = corners[a] - corners[b];
        p[k] = d.dot(&d);
    }
    let b = adapted_frame(corners).axes[2];
    let mut flipped = [false; 4];
    for k in 0..4 {
        let e = normalize(&(corners[(k + 1) % 4] - corners[k]));
        let a = normalize(&(b - e.map(|x| x * b.dot(&e))));
        let w = e.cross(&a);
        let mut g = s[k].dot(&w).atan2(s[k].dot(&a));
        let (mut t0, mut t1) = (theta[2 * k], theta[2 * k + 1]);
        if g.re() > FRAC_PI_2 {
            g = g - std::f64::consts::PI;
            flipped[k] = true;
        } else if g.re() < -FRAC_PI_2 {
            g = g + std::f64::consts::PI;
            flipped[k] = true;
        }
        if flipped[k] {
            t0 = -t0;
            t1 = -t1;
        }
        p[6 + k] = g;
        p[10 + 2 * k] = t0;
        p[11 + 2 * k] = t1;
    }
    (p, flipped)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub compact: CompactBoundary,
    pub info: EncodeInfo,
    /// The boundary after relabeling and `s_e` sign normalization.
    pub canonical: PanelBoundary,
}

pub fn compact_encode(b: &PanelBoundary) -> crate::Result<Encoded> {
    b.validate()?;
    let transpose = needs_transpose(&b.corners);
    let canon = if transpose { b.transposed() } else { b.clone() };
    let (p, flipped) = encode_canonical(&canon.corners, &canon.s_vectors(), &canon.thetas());
    let mut canonical = canon;
    for k in 0..4 {
        if flipped[k] {
            let e = &mut canonical.edges[k];
            e.s = -e.s;
            e.theta = [-e.theta[0], -e.theta[1]];
        }
    }
    Ok(Encoded { compact: CompactBoundary { p }, info: EncodeInfo { transposed: transpose, flipped }, canonical })
}

/// Corner embedding from squared distances, before posing.
fn embed_corners(d: &[f64]) -> crate::Result<[P3; 4]> {
    let bad = |msg: &str| Err(crate::Error::invalid(format!("non-embeddable distances: {msg}")));
    if d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return bad("squared distances must be positive");
    }
    let (d03, d01, d02, d31, d32, d12) = (d[0], d[1], d[2], d[3], d[4], d[5]);
    // c00 at origin, c30 on +x, c03 in the xy half plane y > 0
    let l01 = d01.sqrt();
    let x3 = (d03 + d01 - d31) / (2.0 * l01);
    let y3sq = d03 - x3 * x3;
    let tol = 1e-12 * d.iter().cloned().fold(0.0, f64::max);
    if y3sq <= tol {
        return bad("c00, c30, c03 are collinear or violate the triangle inequality");
    }
    let y3 = y3sq.sqrt();
    let x2 = (d02 + d01 - d12) / (2.0 * l01);
    let y2 = (d02 - d32 + x3 * x3 + y3 * y3 - 2.0 * x2 * x3) / (2.0 * y3);
    let z2sq = d02 - x2 * x2 - y2 * y2;
    if z2sq < -1e-9 * d.iter().cloned().fold(0.0, f64::max) {
        return bad("Cayley-Menger determinant is negative");
    }
    let c00 = P3::zeros();
    let c30 = P3::new(l01, 0.0, 0.0);
    let c03 = P3::new(x3, y3, 0.0);
    // det(c03, c30, c33) = -l01 * y3 * z, so choose z <= 0
    let c33 = P3::new(x2, y2, -z2sq.max(0.0).sqrt());
    Ok([c00, c30, c33, c03])
}

/// Canonical embedding: corner barycenter at the origin and adapted frame
/// aligned with the world axes.
pub fn compact_decode(c: &CompactBoundary) -> crate::Result<PanelBoundary> {
    let raw = embed_corners(c.d())?;
    let frame = checked_frame(&raw)?;
    let r = frame.rotation();
    let corners = raw.map(|x| r * (x - frame.origin));
    let b = P3::new(0.0, 0.0, 1.0);
    let edges = std::array::from_fn(|k| {
        let e = (corners[(k + 1) % 4] - corners[k]).normalize();
        let a = (b - e * b.dot(&e)).normalize();
        let g = c.gamma()[k];
        let s = a * g.cos() + e.cross(&a) * g.sin();
        EdgeCurveParams { s, theta: [c.theta()[2 * k], c.theta()[2 * k + 1]] }
    });
    Ok(PanelBoundary { corners, edges })
}

/// Interior controls in adapted-frame coordinates (`c11, c12, c21, c22`).
pub type Shape = [f64; 12];

/// Encodes a full patch whose boundary is `b`: `(p, ζ)` with `ζ` expressed in
/// the adapted frame of the canonical labeling.
pub fn encode_panel(b: &PanelBoundary, patch: &BezierPatch) -> crate::Result<(Encoded, Shape)> {
    let enc = compact_encode(b)?;
    let net = if enc.info.transposed { patch.transposed() } else { patch.clone() };
    let frame = checked_frame(&enc.canonical.corners)?;
    let mut z = [0.0; 12];
    for (k, &(i, j)) in INTERIOR.iter().enumerate() {
        let q = frame.to_local(&net.ctrl[i][j]);
        z[3 * k..3 * k + 3].copy_from_slice(q.as_slice());
    }
    Ok((enc, z))
}

pub fn shape_points(z: &Shape) -> [P3; 4] {
    std::array::from_fn(|k| P3::new(z[3 * k], z[3 * k + 1], z[3 * k + 2]))
}

/// Patch in the canonical pose of `p` with interior `ζ`.
pub fn decode_panel(c: &CompactBoundary, z: &Shape) -> crate::Result<(PanelBoundary, BezierPatch)> {
    let b = compact_decode(c)?;
    let patch = b.patch(&shape_points(z));
    Ok((b, patch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_distances() {
        let b = PanelBoundary::straight([
            P3::new(0.0, 0.0, 0.0),
            P3::new(1.0, 0.0, 0.0),
            P3::new(1.0, 1.0, 0.0),
            P3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        let p = compact_encode(&b).unwrap().compact;
        let want = [1.0, 1.0, 2.0, 2.0, 1.0, 1.0];
        for (a, w) in p.d().iter().zip(want.iter()) {
            assert!((a - w).abs() < 1e-14);
        }
        assert!(p.gamma().iter().all(|g| g.abs() < 1e-14));
        let dec = compact_decode(&p).unwrap();
        for (k, c) in dec.curves().iter().enumerate() {
            let e = dec.edge_dir(k);
            for q in c {
                let off = q - c[0];
                assert!((off - e * off.dot(&e)).norm() < 1e-12, "curve {k} is not straight");
            }
        }
    }

    #[test]
    fn non_embeddable_distances_are_rejected() {
        let c = CompactBoundary { p: [1.0, 1.0, 100.0, 2.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] };
        let err = compact_decode(&c).unwrap_err().to_string();
        assert!(err.contains("non-embeddable"), "{err}");
    }

    #[test]
    fn decoded_boundary_is_canonical() {
        let mut c = CompactBoundary { p: [0.0; 18] };
        c.p[..6].copy_from_slice(&[1.0, 1.0, 1.9, 2.0, 1.0, 1.0]);
        let b = compact_decode(&c).unwrap();
        assert!(b.orientation_det() >= 0.0);
        let f = b.frame().unwrap();
        assert!(f.origin.norm() < 1e-12);
        assert!((f.axes[2] - P3::z()).norm() < 1e-12);
    }
}
