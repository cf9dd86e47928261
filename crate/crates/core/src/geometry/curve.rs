//! Planar cubic boundary curves with inner points from the linearized
//! bending-energy minimizer.

use crate::ad::{normalize, Real};
use nalgebra::Vector3;

/// Tangent `e cosθ + s sinθ`.
pub fn tangent<T: Real>(e: &Vector3<T>, s: &Vector3<T>, theta: T) -> Vector3<T> {
    let (c, sn) = (theta.cos(), theta.sin());
    e.map(|x| x * c) + s.map(|x| x * sn)
}

/// Distances `(m1, m2)` of the inner control points along unit tangents
/// `t1` (at `v1`) and `t2` (at `v2`).
pub fn inner_lengths<T: Real>(
    v1: &Vector3<T>,
    v2: &Vector3<T>,
    t1: &Vector3<T>,
    t2: &Vector3<T>,
) -> (T, T) {
    let d = v2 - v1;
    let c = t1.dot(t2);
    let den = T::cst(4.0) - c * c;
    let m1 = d.dot(&(t1.map(|x| x * 2.0) - t2.map(|x| x * c))) / den;
    // swapping the endpoints reverses the chord
    let m2 = (-d).dot(&(t2.map(|x| x * 2.0) - t1.map(|x| x * c))) / den;
    (m1, m2)
}

/// Four control points of the boundary curve from `v1` to `v2`.
pub fn boundary_curve<T: Real>(
    v1: &Vector3<T>,
    v2: &Vector3<T>,
    s: &Vector3<T>,
    theta1: T,
    theta2: T,
) -> [Vector3<T>; 4] {
    let e1 = normalize(&(v2 - v1));
    let e2 = -e1;
    let t1 = tangent(&e1, s, theta1);
    let t2 = tangent(&e2, s, theta2);
    let (m1, m2) = inner_lengths(v1, v2, &t1, &t2);
    [*v1, v1 + t1.map(|x| x * m1), v2 + t2.map(|x| x * m2), *v2]
}

/// Validated entry point: `e1`, `e2` must be unit and `s` unit and
/// orthogonal to the chord.
pub fn build_boundary_curve(
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
    s: &Vector3<f64>,
    theta1: f64,
    theta2: f64,
) -> crate::Result<[Vector3<f64>; 4]> {
    const TOL: f64 = 1e-9;
    for (name, v) in [("e1", e1), ("e2", e2), ("s_e", s)] {
        if (v.norm() - 1.0).abs() > TOL {
            return Err(crate::Error::invalid(format!("{name} is not a unit vector")));
        }
    }
    let chord = v2 - v1;
    let l = chord.norm();
    if l <= 0.0 {
        return Err(crate::Error::invalid("curve endpoints coincide"));
    }
    if (s.dot(&chord) / l).abs() > TOL {
        return Err(crate::Error::invalid("s_e is not orthogonal to the edge"));
    }
    let t1 = tangent(e1, s, theta1);
    let t2 = tangent(e2, s, theta2);
    let (m1, m2) = inner_lengths(v1, v2, &t1, &t2);
    Ok([*v1, v1 + t1 * m1, v2 + t2 * m2, *v2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_segment_gives_thirds() {
        let v1 = Vector3::zeros();
        let v2 = Vector3::new(1.0, 0.0, 0.0);
        let e = Vector3::new(1.0, 0.0, 0.0);
        let s = Vector3::new(0.0, 0.0, 1.0);
        let c = build_boundary_curve(&v1, &v2, &e, &-e, &s, 0.0, 0.0).unwrap();
        assert!((c[1] - Vector3::new(1.0 / 3.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((c[2] - Vector3::new(2.0 / 3.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn symmetric_arc_matches_closed_form() {
        // For t1·t2 = -cos 2θ and chord L the formula collapses to
        // m = L cosθ / (2 + cos 2θ).
        let l = 300.0;
        let th = 5f64.to_radians();
        let v1 = Vector3::zeros();
        let v2 = Vector3::new(l, 0.0, 0.0);
        let s = Vector3::new(0.0, 1.0, 0.0);
        let e = Vector3::new(1.0, 0.0, 0.0);
        let c = build_boundary_curve(&v1, &v2, &e, &-e, &s, th, th).unwrap();
        let m1 = (c[1] - c[0]).norm();
        let m2 = (c[2] - c[3]).norm();
        let want = l * th.cos() / (2.0 + (2.0 * th).cos());
        assert!((m1 - want).abs() < 1e-12 && (m2 - want).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_edge_plane() {
        let v1 = Vector3::zeros();
        let v2 = Vector3::new(1.0, 0.0, 0.0);
        let e = Vector3::new(1.0, 0.0, 0.0);
        let tilted = Vector3::new(0.1, 0.0, 1.0).normalize();
        assert!(build_boundary_curve(&v1, &v2, &e, &-e, &tilted, 0.0, 0.0).is_err());
        let long = Vector3::new(0.0, 0.0, 2.0);
        assert!(build_boundary_curve(&v1, &v2, &e, &-e, &long, 0.0, 0.0).is_err());
    }
}
