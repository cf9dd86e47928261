//! Least-squares fit of the four interior controls to a target surface mesh.

use super::boundary::PanelBoundary;
use super::patch::{bernstein, eval_net, BezierPatch, INTERIOR};
use crate::P3;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// Regularizer weight on the squared control-net edge lengths, relative to
/// area weights normalized to unit sum.
pub const W_B: f64 = 1e-5;

pub struct FitTarget<'a> {
    pub points: &'a [P3],
    pub normals: &'a [P3],
    pub areas: &'a [f64],
    /// Optional starting parameters for the closest-point search.
    pub uv_hint: Option<&'a [[f64; 2]]>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub patch: BezierPatch,
    /// Interior controls in the boundary's adapted frame.
    pub shape: [P3; 4],
    /// `max |(y_i - x_i)·n_i|` over the target vertices.
    pub residual: f64,
    pub uv: Vec<[f64; 2]>,
}

/// Parameters of the point on `patch` closest to `x`, from `start`.
pub fn closest_point(patch: &BezierPatch, x: &P3, start: [f64; 2]) -> [f64; 2] {
    let mut uv = Vector2::new(start[0].clamp(0.0, 1.0), start[1].clamp(0.0, 1.0));
    for _ in 0..30 {
        let [s, su, sv] = eval_net(&patch.ctrl, uv.x, uv.y);
        let r = s - x;
        let jtj = Matrix2::new(su.dot(&su), su.dot(&sv), su.dot(&sv), sv.dot(&sv));
        let g = Vector2::new(su.dot(&r), sv.dot(&r));
        let Some(step) = jtj.try_inverse().map(|m| -(m * g)) else { break };
        let next = Vector2::new((uv.x + step.x).clamp(0.0, 1.0), (uv.y + step.y).clamp(0.0, 1.0));
        let moved = (next - uv).norm();
        uv = next;
        if moved < 1e-14 {
            break;
        }
    }
    [uv.x, uv.y]
}

fn coarse_guess(patch: &BezierPatch, x: &P3) -> [f64; 2] {
    let n = 12;
    let mut best = (f64::INFINITY, [0.5, 0.5]);
    for a in 0..=n {
        for b in 0..=n {
            let uv = [a as f64 / n as f64, b as f64 / n as f64];
            let d = (patch.position(uv[0], uv[1]) - x).norm_squared();
            if d < best.0 {
                best = (d, uv);
            }
        }
    }
    best.1
}

/// Control-net edges touching an interior control.
fn regularized_edges() -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            for (di, dj) in [(1, 0), (0, 1)] {
                let (k, l) = (i + di, j + dj);
                if k > 3 || l > 3 {
                    continue;
                }
                let interior = |a: usize, b: usize| (1..=2).contains(&a) && (1..=2).contains(&b);
                if interior(i, j) || interior(k, l) {
                    out.push(((i, j), (k, l)));
                }
            }
        }
    }
    out
}

pub fn fit_interior_controls(
    boundary: &PanelBoundary,
    initial: &BezierPatch,
    target: &FitTarget<'_>,
    w_b: f64,
) -> crate::Result<FitResult> {
    let n = target.points.len();
    if target.normals.len() != n || target.areas.len() != n {
        return Err(crate::Error::invalid("target points, normals and areas differ in length"));
    }
    if let Some(h) = target.uv_hint {
        if h.len() != n {
            return Err(crate::Error::invalid("uv hint length differs from the target"));
        }
    }
    let uv: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let start = target.uv_hint.map(|h| h[i]).unwrap_or_else(|| coarse_guess(initial, &target.points[i]));
            closest_point(initial, &target.points[i], start)
        })
        .collect();

    let mut base = initial.clone();
    base.set_interior(&[P3::zeros(); 4]);
    let slot = |i: usize, j: usize| INTERIOR.iter().position(|&q| q == (i, j));

    // area weights as fractions of the total, so that w_b is scale-free
    let total_area: f64 = target.areas.iter().map(|a| a.max(0.0)).sum();
    if !(total_area > 0.0) {
        return Err(crate::Error::invalid("target areas sum to zero"));
    }
    let mut ata = DMatrix::<f64>::zeros(12, 12);
    let mut atb = DVector::<f64>::zeros(12);
    let mut row = [0.0f64; 12];
    for i in 0..n {
        let (bu, _) = bernstein(uv[i][0]);
        let (bv, _) = bernstein(uv[i][1]);
        let nrm = target.normals[i];
        let w = target.areas[i].max(0.0) / total_area;
        for (k, &(a, b)) in INTERIOR.iter().enumerate() {
            let bk = bu[a] * bv[b];
            for c in 0..3 {
                row[3 * k + c] = bk * nrm[c];
            }
        }
        let rhs = (target.points[i] - base.position(uv[i][0], uv[i][1])).dot(&nrm);
        for p in 0..12 {
            atb[p] += w * row[p] * rhs;
            for q in 0..12 {
                ata[(p, q)] += w * row[p] * row[q];
            }
        }
    }
    for ((i0, j0), (i1, j1)) in regularized_edges() {
        // w_b |c_a - c_b|² split per coordinate
        let (sa, sb) = (slot(i0, j0), slot(i1, j1));
        for c in 0..3 {
            let mut fixed = 0.0;
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(2);
            match sa {
                Some(k) => coeffs.push((3 * k + c, 1.0)),
                None => fixed += initial.ctrl[i0][j0][c],
            }
            match sb {
                Some(k) => coeffs.push((3 * k + c, -1.0)),
                None => fixed -= initial.ctrl[i1][j1][c],
            }
            for &(p, cp) in &coeffs {
                atb[p] -= w_b * cp * fixed;
                for &(q, cq) in &coeffs {
                    ata[(p, q)] += w_b * cp * cq;
                }
            }
        }
    }
    let chol = ata
        .cholesky()
        .ok_or_else(|| crate::Error::numerical("interior fit normal equations are singular"))?;
    let x = chol.solve(&atb);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::numerical("interior fit produced non-finite controls"));
    }
    let pts: [P3; 4] = std::array::from_fn(|k| P3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]));
    let mut patch = initial.clone();
    patch.set_interior(&pts);
    let residual = (0..n)
        .map(|i| (patch.position(uv[i][0], uv[i][1]) - target.points[i]).dot(&target.normals[i]).abs())
        .fold(0.0, f64::max);
    let frame = boundary.frame()?;
    let shape = pts.map(|p| frame.to_local(&p));
    Ok(FitResult { patch, shape, residual, uv })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_has_twelve_entries() {
        assert_eq!(regularized_edges().len(), 12);
    }

    #[test]
    fn flat_target_gives_planar_fit() {
        let b = PanelBoundary::straight([
            P3::new(0.0, 0.0, 0.0),
            P3::new(300.0, 0.0, 0.0),
            P3::new(320.0, 250.0, 0.0),
            P3::new(-10.0, 270.0, 0.0),
        ])
        .unwrap();
        let init = b.zero_twist_patch();
        let mut pts = Vec::new();
        for a in 0..=10 {
            for c in 0..=10 {
                pts.push(init.position(a as f64 / 10.0, c as f64 / 10.0));
            }
        }
        let normals = vec![P3::z(); pts.len()];
        let areas = vec![1.0; pts.len()];
        let t = FitTarget { points: &pts, normals: &normals, areas: &areas, uv_hint: None };
        let fit = fit_interior_controls(&b, &init, &t, W_B).unwrap();
        assert!(fit.residual < 1e-10);
        for p in fit.patch.interior() {
            assert!(p.z.abs() < 1e-10);
        }
    }
}
