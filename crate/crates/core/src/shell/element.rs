//! Per-triangle strains, energies and analytic gradients.
//!
//! Local edge `k` of a triangle is opposite its vertex `k`, i.e. it joins
//! vertices `k+1` and `k+2`.

use super::material::MaterialParams;
use super::mesh::P2;
use crate::P3;
use nalgebra::{Matrix2, Matrix3x2};

pub type Sym2 = Matrix2<f64>;

/// Rest edge rotated by -90°: outward normal scaled by the edge length.
#[inline]
pub fn rot_cw(v: &P2) -> P2 {
    P2::new(v.y, -v.x)
}

#[inline]
fn rot_cw_t(v: &P2) -> P2 {
    P2::new(-v.y, v.x)
}

pub fn signed_area(r: &[P2; 3]) -> f64 {
    let (a, b) = (r[1] - r[0], r[2] - r[0]);
    0.5 * (a.x * b.y - a.y * b.x)
}

/// Green strain of the triangle from squared edge-length changes,
/// `Ē = 1/(16 Ā²) Σ s_i (t_j t_kᵀ + t_k t_jᵀ)` with `s_i = l̄_i² - l_i²`
/// and `t` the rest edges rotated by -90°.
pub fn membrane_strain(x: &[P3; 3], rest: &[P2; 3]) -> crate::Result<Sym2> {
    let a = signed_area(rest);
    let scale = (rest[1] - rest[0]).norm_squared().max((rest[2] - rest[0]).norm_squared());
    if !(a > 1e-14 * scale) {
        return Err(crate::Error::invalid("degenerate rest triangle"));
    }
    let mut e = Sym2::zeros();
    let t: [P2; 3] = std::array::from_fn(|k| rot_cw(&(rest[(k + 2) % 3] - rest[(k + 1) % 3])));
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let lr = (rest[k] - rest[j]).norm_squared();
        let ld = (x[k] - x[j]).norm_squared();
        let s = lr - ld;
        e += (t[j] * t[k].transpose() + t[k] * t[j].transpose()) * s;
    }
    Ok(e / (16.0 * a * a))
}

/// Deformation gradient `F = D D̄⁻¹` and the inverse rest edge matrix.
pub fn deformation_gradient(x: &[P3; 3], rest: &[P2; 3]) -> Option<(Matrix3x2<f64>, Matrix2<f64>)> {
    let dr = Matrix2::from_columns(&[rest[1] - rest[0], rest[2] - rest[0]]);
    let inv = dr.try_inverse()?;
    let d = Matrix3x2::from_columns(&[x[1] - x[0], x[2] - x[0]]);
    Some((d * inv, inv))
}

pub fn green_strain(f: &Matrix3x2<f64>) -> Sym2 {
    (f.transpose() * f - Sym2::identity()) * 0.5
}

/// `h (λ/2 tr² + μ tr E²)` with the membrane λ.
pub fn membrane_density(e: &Sym2, m: &MaterialParams) -> f64 {
    let tr = e.trace();
    m.h * (0.5 * m.lambda_membrane() * tr * tr + m.mu * (e * e).trace())
}

/// `μh³/12 (λ/(λ+2μ) tr² + tr Ê²)`.
pub fn bending_density(b: &Sym2, m: &MaterialParams) -> f64 {
    let tr = b.trace();
    m.mu * m.h.powi(3) / 12.0 * (m.bending_ratio() * tr * tr + (b * b).trace())
}

/// Second Piola stress `λ tr(E) I + 2μE` with the membrane λ.
pub fn piola2(e: &Sym2, m: &MaterialParams) -> Sym2 {
    Sym2::identity() * (m.lambda_membrane() * e.trace()) + e * (2.0 * m.mu)
}

/// Signed dihedral angle at edge `x0 -> x1` between the left triangle
/// `(x0, x1, x2)` and the right triangle `(x1, x0, x3)`, with gradients.
pub fn dihedral(x0: &P3, x1: &P3, x2: &P3, x3: &P3) -> Option<(f64, [P3; 4])> {
    let e = x1 - x0;
    let len = e.norm();
    let c1 = e.cross(&(x2 - x0));
    let c2 = (x0 - x1).cross(&(x3 - x1));
    let (a1, a2) = (c1.norm(), c2.norm());
    if len <= 0.0 || a1 <= 0.0 || a2 <= 0.0 {
        return None;
    }
    let (n1, n2) = (c1 / a1, c2 / a2);
    let eh = e / len;
    let theta = eh.dot(&n1.cross(&n2)).atan2(n1.dot(&n2));
    let (h2, h3) = (a1 / len, a2 / len);
    let g2 = -n1 / h2;
    let g3 = -n2 / h3;
    let l2 = len * len;
    let al2 = (x2 - x0).dot(&e) / l2;
    let al3 = (x3 - x0).dot(&e) / l2;
    let g1 = -g2 * al2 - g3 * al3;
    let g0 = -g2 * (1.0 - al2) - g3 * (1.0 - al3);
    Some((theta, [g0, g1, g2, g3]))
}

/// Everything a triangle's energy depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementInput {
    pub x: [P3; 3],
    /// Vertex across local edge `k`, if that edge is interior.
    pub opp: [Option<P3>; 3],
    pub phi: [f64; 3],
    /// `+1` if this triangle is the left one of edge `k`.
    pub sign: [f64; 3],
    pub rest: [P2; 3],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementGrad {
    pub energy: f64,
    pub membrane: f64,
    pub bending: f64,
    pub x: [P3; 3],
    pub opp: [P3; 3],
    pub phi: [f64; 3],
    pub rest: [P2; 3],
}

struct EdgeDihedral {
    theta: f64,
    /// Gradients w.r.t. own vertices and the opposite vertex.
    g_own: [P3; 3],
    g_opp: P3,
}

fn edge_dihedral(inp: &ElementInput, k: usize) -> Option<EdgeDihedral> {
    let Some(d) = inp.opp[k] else {
        return Some(EdgeDihedral { theta: 0.0, g_own: [P3::zeros(); 3], g_opp: P3::zeros() });
    };
    let (ia, ib, ic) = ((k + 1) % 3, (k + 2) % 3, k);
    let (a, b, c) = (inp.x[ia], inp.x[ib], inp.x[ic]);
    let mut g_own = [P3::zeros(); 3];
    if inp.sign[k] > 0.0 {
        let (theta, g) = dihedral(&a, &b, &c, &d)?;
        g_own[ia] = g[0];
        g_own[ib] = g[1];
        g_own[ic] = g[2];
        Some(EdgeDihedral { theta, g_own, g_opp: g[3] })
    } else {
        let (theta, g) = dihedral(&b, &a, &d, &c)?;
        g_own[ib] = g[0];
        g_own[ia] = g[1];
        g_own[ic] = g[3];
        Some(EdgeDihedral { theta, g_own, g_opp: g[2] })
    }
}

/// Shape operator `Ê = Σ (θ_k/2 + s_k φ_k) / (Ā l̄_k) t̄_k t̄_kᵀ`.
pub fn bending_strain(inp: &ElementInput) -> crate::Result<Sym2> {
    let a = signed_area(&inp.rest);
    if !(a > 0.0) {
        return Err(crate::Error::invalid("degenerate rest triangle"));
    }
    let mut b = Sym2::zeros();
    for k in 0..3 {
        let d = edge_dihedral(inp, k).ok_or_else(|| crate::Error::invalid("degenerate deformed triangle"))?;
        let e = inp.rest[(k + 2) % 3] - inp.rest[(k + 1) % 3];
        let l = e.norm();
        if l <= 0.0 {
            return Err(crate::Error::invalid("zero-length edge"));
        }
        let t = rot_cw(&e);
        b += t * t.transpose() * ((0.5 * d.theta + inp.sign[k] * inp.phi[k]) / (a * l));
    }
    Ok(b)
}

/// Membrane and bending strain together, `None` if degenerate.
pub fn strains(inp: &ElementInput) -> Option<(Sym2, Sym2, Matrix3x2<f64>)> {
    let (f, _) = deformation_gradient(&inp.x, &inp.rest)?;
    let b = bending_strain(inp).ok()?;
    Some((green_strain(&f), b, f))
}

/// Element energy `Ā (W̄ + Ŵ)`; `None` if the rest triangle is inverted or
/// anything is degenerate.
pub fn element_energy(inp: &ElementInput, m: &MaterialParams) -> Option<f64> {
    let a = signed_area(&inp.rest);
    if !(a > 0.0) {
        return None;
    }
    let (e, b, _) = strains(inp)?;
    let w = a * (membrane_density(&e, m) + bending_density(&b, m));
    w.is_finite().then_some(w)
}

pub fn element_gradient(inp: &ElementInput, m: &MaterialParams) -> Option<ElementGrad> {
    let r = &inp.rest;
    let area = signed_area(r);
    if !(area > 0.0) {
        return None;
    }
    let mut g = ElementGrad::default();

    // membrane
    let (f, dinv) = deformation_gradient(&inp.x, r)?;
    let e = green_strain(&f);
    let psi_m = membrane_density(&e, m);
    let p = f * piola2(&e, m) * m.h;
    let gx = p * dinv.transpose() * area;
    let c0: P3 = gx.column(0).into();
    let c1: P3 = gx.column(1).into();
    g.x[1] += c0;
    g.x[2] += c1;
    g.x[0] -= c0 + c1;
    let gr = (dinv.transpose() * psi_m - f.transpose() * p * dinv.transpose()) * area;
    let r0: P2 = gr.column(0).into();
    let r1: P2 = gr.column(1).into();
    g.rest[1] += r0;
    g.rest[2] += r1;
    g.rest[0] -= r0 + r1;

    // bending
    let dih: Vec<EdgeDihedral> = (0..3).map(|k| edge_dihedral(inp, k)).collect::<Option<_>>()?;
    let edges: [P2; 3] = std::array::from_fn(|k| r[(k + 2) % 3] - r[(k + 1) % 3]);
    let lens: [f64; 3] = edges.map(|v| v.norm());
    let ts: [P2; 3] = edges.map(|v| rot_cw(&v));
    let cs: [f64; 3] = std::array::from_fn(|k| 0.5 * dih[k].theta + inp.sign[k] * inp.phi[k]);
    let mut b = Sym2::zeros();
    for k in 0..3 {
        b += ts[k] * ts[k].transpose() * (cs[k] / (area * lens[k]));
    }
    let psi_b = bending_density(&b, m);
    let coef = m.mu * m.h.powi(3) / 12.0;
    let mm = (Sym2::identity() * (2.0 * m.bending_ratio() * b.trace()) + b * 2.0) * coef;
    let mut k_area = psi_b;
    for k in 0..3 {
        let mt = mm * ts[k];
        let q = ts[k].dot(&mt);
        let d_theta = q / (2.0 * lens[k]);
        for v in 0..3 {
            g.x[v] += dih[k].g_own[v] * d_theta;
        }
        g.opp[k] += dih[k].g_opp * d_theta;
        g.phi[k] = inp.sign[k] * q / lens[k];
        let ge = edges[k] * (-cs[k] * q / lens[k].powi(3)) + rot_cw_t(&mt) * (2.0 * cs[k] / lens[k]);
        g.rest[(k + 2) % 3] += ge;
        g.rest[(k + 1) % 3] -= ge;
        k_area -= cs[k] * q / (area * lens[k]);
    }
    for v in 0..3 {
        g.rest[v] += ts[v] * (-0.5 * k_area);
    }

    g.membrane = area * psi_m;
    g.bending = area * psi_b;
    g.energy = g.membrane + g.bending;
    g.energy.is_finite().then_some(g)
}

/// Number of scalar local variables: own x (9), opposite x (9), φ (3), rest (6).
pub const LOCAL_DOFS: usize = 27;

impl ElementInput {
    pub fn to_local(&self) -> [f64; LOCAL_DOFS] {
        let mut v = [0.0; LOCAL_DOFS];
        for i in 0..3 {
            v[3 * i..3 * i + 3].copy_from_slice(self.x[i].as_slice());
            if let Some(o) = self.opp[i] {
                v[9 + 3 * i..12 + 3 * i].copy_from_slice(o.as_slice());
            }
            v[18 + i] = self.phi[i];
            v[21 + 2 * i] = self.rest[i].x;
            v[22 + 2 * i] = self.rest[i].y;
        }
        v
    }

    pub fn from_local(&self, v: &[f64; LOCAL_DOFS]) -> Self {
        let mut out = *self;
        for i in 0..3 {
            out.x[i] = P3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
            if out.opp[i].is_some() {
                out.opp[i] = Some(P3::new(v[9 + 3 * i], v[10 + 3 * i], v[11 + 3 * i]));
            }
            out.phi[i] = v[18 + i];
            out.rest[i] = P2::new(v[21 + 2 * i], v[22 + 2 * i]);
        }
        out
    }
}

impl ElementGrad {
    pub fn to_local(&self) -> [f64; LOCAL_DOFS] {
        let mut v = [0.0; LOCAL_DOFS];
        for i in 0..3 {
            v[3 * i..3 * i + 3].copy_from_slice(self.x[i].as_slice());
            v[9 + 3 * i..12 + 3 * i].copy_from_slice(self.opp[i].as_slice());
            v[18 + i] = self.phi[i];
            v[21 + 2 * i] = self.rest[i].x;
            v[22 + 2 * i] = self.rest[i].y;
        }
        v
    }
}

/// Central-difference Hessian of the analytic gradient in local variables.
/// Rows/columns of absent opposite vertices are zero.
pub fn element_hessian(inp: &ElementInput, m: &MaterialParams, steps: &[f64; LOCAL_DOFS]) -> Option<Vec<f64>> {
    let base = inp.to_local();
    let mut h = vec![0.0; LOCAL_DOFS * LOCAL_DOFS];
    for j in 0..LOCAL_DOFS {
        if (9..18).contains(&j) && inp.opp[(j - 9) / 3].is_none() {
            continue;
        }
        let mut vp = base;
        let mut vm = base;
        vp[j] += steps[j];
        vm[j] -= steps[j];
        let gp = element_gradient(&inp.from_local(&vp), m)?.to_local();
        let gm = element_gradient(&inp.from_local(&vm), m)?.to_local();
        for i in 0..LOCAL_DOFS {
            h[i * LOCAL_DOFS + j] = (gp[i] - gm[i]) / (2.0 * steps[j]);
        }
    }
    // symmetrize
    for i in 0..LOCAL_DOFS {
        for j in 0..i {
            let s = 0.5 * (h[i * LOCAL_DOFS + j] + h[j * LOCAL_DOFS + i]);
            h[i * LOCAL_DOFS + j] = s;
            h[j * LOCAL_DOFS + i] = s;
        }
    }
    Some(h)
}
