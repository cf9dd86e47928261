//! Residual blocks of the design energy.
//!
//! Every residual is stored pre-multiplied by the square root of its weight so
//! the energy is the plain sum of squares. Inequalities are turned into
//! equalities with squared slacks.

use crate::face::{FaceJacobian, FaceValues, NX};
use crate::reference::{Foot, ReferenceSurface};
use crate::state::DesignState;
use crate::topology::Topology;
use coldbend_core::ad::{normalize, Dual, Real};
use coldbend_core::geometry::curve::tangent;
use coldbend_core::P3;
use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

/// Bound on |θ| enforced by the angle constraint, just inside the 5° domain.
pub const THETA_BOUND: f64 = 4.9 * std::f64::consts::PI / 180.0;

/// Below this sine of the turning angle a polyline is treated as straight.
pub const COLLINEAR_SINE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignWeights {
    pub w_sigma: f64,
    /// Curve smoothness: kinks, tangent continuity, edge planes.
    pub w_s: f64,
    pub w_f: f64,
    pub w_p: f64,
    /// Domain constraints on angles and edge-plane vectors.
    pub w_c: f64,
    /// Stress bound (MPa).
    pub sigma_max: f64,
    /// Fairness weight factor per iteration.
    pub fairness_decay: f64,
    /// Relative weight of kinks inside the smoothness term.
    pub kink_factor: f64,
}

impl Default for DesignWeights {
    fn default() -> Self {
        Self {
            w_sigma: 1.0,
            w_s: 1e-2,
            w_f: 1e-1,
            w_p: 1e-1,
            w_c: 1e-2,
            sigma_max: 65.0,
            fairness_decay: 0.9,
            kink_factor: 0.1,
        }
    }
}

impl DesignWeights {
    pub fn validate(&self) -> crate::Result<()> {
        let all = [self.w_sigma, self.w_s, self.w_f, self.w_p, self.w_c, self.sigma_max, self.fairness_decay, self.kink_factor];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(crate::Error::Invalid("weights must be finite and non-negative".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Stress,
    Kink,
    Tangent,
    Bisector,
    Singular,
    Fairness,
    Proximity,
    Angle,
    EdgePlane,
}

/// Per-term share of the energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub stress: f64,
    pub kink: f64,
    pub tangent: f64,
    pub bisector: f64,
    pub singular: f64,
    pub fairness: f64,
    pub proximity: f64,
    pub angle: f64,
    pub edge_plane: f64,
}

impl Breakdown {
    pub fn add(&mut self, term: Term, v: f64) {
        let slot = match term {
            Term::Stress => &mut self.stress,
            Term::Kink => &mut self.kink,
            Term::Tangent => &mut self.tangent,
            Term::Bisector => &mut self.bisector,
            Term::Singular => &mut self.singular,
            Term::Fairness => &mut self.fairness,
            Term::Proximity => &mut self.proximity,
            Term::Angle => &mut self.angle,
            Term::EdgePlane => &mut self.edge_plane,
        };
        *slot += v;
    }

    pub fn total(&self) -> f64 {
        self.stress
            + self.kink
            + self.tangent
            + self.bisector
            + self.singular
            + self.fairness
            + self.proximity
            + self.angle
            + self.edge_plane
    }
}

/// One weighted residual and, when linearized, its sparse gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub term: Term,
    pub value: f64,
    /// Distinct global indices, sorted.
    pub entries: Vec<(usize, f64)>,
}

impl Row {
    fn new(term: Term, value: f64, mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        Self { term, value, entries: merged }
    }
}

pub fn energy_of(rows: &[Row]) -> (f64, Breakdown) {
    let mut b = Breakdown::default();
    for r in rows {
        b.add(r.term, r.value * r.value);
    }
    (b.total(), b)
}

/// Quantities held fixed for the duration of one iteration: closest points,
/// singular-vertex planes, the set of curved polyline edges, and stresses of
/// faces outside the surrogate domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Frozen {
    pub feet: Vec<Option<Foot>>,
    /// Per singular vertex, the normal of the least-squares tangent plane.
    pub planes: Vec<P3>,
    /// Per inner polyline edge, whether both osculating planes are defined.
    pub curved: Vec<bool>,
    /// Per face, the per-component σ̂ if the face is outside the domain.
    pub frozen_sigma: Vec<Option<Vec<f64>>>,
    pub fairness_scale: f64,
}

fn turning_sine(a: &P3, b: &P3, c: &P3) -> f64 {
    let (u, v) = (b - a, c - b);
    let d = u.norm() * v.norm();
    if d == 0.0 {
        0.0
    } else {
        u.cross(&v).norm() / d
    }
}

/// Inward unit tangent of edge `e` at its end `v`.
fn end_tangent<T: Real>(v: &Vector3<T>, nbr: &Vector3<T>, s: &Vector3<T>, theta: T) -> Vector3<T> {
    tangent(&normalize(&(nbr - v)), s, theta)
}

impl Frozen {
    pub fn new(
        topo: &Topology,
        state: &DesignState,
        reference: Option<&ReferenceSurface>,
        faces: &[FaceValues],
        in_domain: &dyn Fn(&[f64; 18]) -> bool,
        iteration: usize,
        weights: &DesignWeights,
    ) -> Self {
        let feet = state.vertices.iter().map(|v| reference.map(|r| r.closest(v))).collect();
        let planes = topo
            .singular
            .iter()
            .map(|&v| {
                let x = state.vertices[v];
                let mut m = Matrix3::zeros();
                for &e in &topo.vertex_edges[v] {
                    let t = end_tangent(&x, &state.vertices[topo.other(e, v)], &state.s[e], state.theta[e][topo.end_of(e, v)]);
                    m += t * t.transpose();
                }
                let eig = m.symmetric_eigen();
                eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned()
            })
            .collect();
        let curved = topo
            .inner_edges
            .iter()
            .map(|ie| {
                let [a, b, c, d] = ie.vertices.map(|i| state.vertices[i]);
                turning_sine(&a, &b, &c) > COLLINEAR_SINE && turning_sine(&b, &c, &d) > COLLINEAR_SINE
            })
            .collect();
        let frozen_sigma = faces
            .iter()
            .map(|f| (!in_domain(&f.p)).then(|| f.prediction.modes.iter().map(|m| m.sigma).collect()))
            .collect();
        Self { feet, planes, curved, frozen_sigma, fairness_scale: weights.fairness_decay.powi(iteration as i32) }
    }
}

/// Stress and kink inputs of one face for its selected mode.
#[derive(Clone, Debug)]
pub struct FaceTerm {
    pub sigma: f64,
    pub normals: [P3; 4],
    pub dsigma: Option<[f64; NX]>,
    pub dnormals: Option<[SMatrix<f64, 3, NX>; 4]>,
}

impl FaceTerm {
    pub fn from_values(v: &FaceValues, x: &[f64; NX], mode: usize) -> Self {
        Self { sigma: v.prediction.modes[mode].sigma, normals: v.normals(x, mode), dsigma: None, dnormals: None }
    }

    pub fn from_jacobian(j: &FaceJacobian) -> Self {
        Self { sigma: j.sigma, normals: j.normals, dsigma: Some(j.dsigma), dnormals: Some(j.dnormals) }
    }
}

/// `t_a · t_b + 1` for the inward curve tangents of two edges meeting at `v`;
/// zero when the tangents are anti-parallel.
pub fn joint_residual<T: Real>(
    v: &Vector3<T>,
    a: (&Vector3<T>, &Vector3<T>, T),
    b: (&Vector3<T>, &Vector3<T>, T),
) -> T {
    let ta = end_tangent(v, a.0, a.1, a.2);
    let tb = end_tangent(v, b.0, b.1, b.2);
    ta.dot(&tb) + 1.0
}

/// `s · (n_b + n_c)` for edge `(b, c)` of the polyline `a, b, c, d`.
pub fn bisector_residual<T: Real>(a: &Vector3<T>, b: &Vector3<T>, c: &Vector3<T>, d: &Vector3<T>, s: &Vector3<T>) -> T {
    let nb = normalize(&(b - a).cross(&(c - b)));
    let nc = normalize(&(c - b).cross(&(d - c)));
    s.dot(&(nb + nc))
}

/// `(s · ê, s · s - 1)` for the edge from `a` to `b`.
pub fn edge_plane_residuals<T: Real>(a: &Vector3<T>, b: &Vector3<T>, s: &Vector3<T>) -> [T; 2] {
    [s.dot(&normalize(&(b - a))), s.dot(s) - 1.0]
}

/// Residual with gradient over `N` local unknowns.
fn ad_row<const N: usize>(
    term: Term,
    sw: f64,
    dofs: &[usize; N],
    x: &[f64; N],
    jac: bool,
    f: impl Fn(&[Dual<N>; N]) -> Dual<N>,
) -> Row {
    let xd: [Dual<N>; N] = std::array::from_fn(|i| Dual::var(x[i], i));
    let r = f(&xd);
    let entries = if jac { (0..N).map(|i| (dofs[i], sw * r.d[i])).collect() } else { Vec::new() };
    Row::new(term, sw * r.v, entries)
}

fn v3<T: Copy + nalgebra::Scalar>(x: &[T], i: usize) -> Vector3<T> {
    Vector3::new(x[i], x[i + 1], x[i + 2])
}

fn put(dst: &mut [f64], at: usize, p: &P3) {
    dst[at..at + 3].copy_from_slice(p.as_slice());
}

fn put_idx(dst: &mut [usize], at: usize, first: usize) {
    for c in 0..3 {
        dst[at + c] = first + c;
    }
}

/// All residuals in a fixed order. With `jac` set, each row also carries its
/// gradient; faces must then provide derivatives.
pub fn assemble(
    topo: &Topology,
    weights: &DesignWeights,
    frozen: &Frozen,
    state: &DesignState,
    faces: &[FaceTerm],
    jac: bool,
) -> Vec<Row> {
    let l = state.layout();
    let mut rows = Vec::new();

    // stress
    let sw = weights.w_sigma.sqrt();
    for (f, ft) in faces.iter().enumerate() {
        let u = state.u_face[f];
        let (sigma, dsig) = match &frozen.frozen_sigma[f] {
            Some(s) => (s[state.modes[f]], None),
            None => (ft.sigma, ft.dsigma),
        };
        let mut entries = Vec::new();
        if jac {
            if let Some(d) = dsig {
                let dofs = state.face_dofs(topo, f);
                entries.extend(dofs.iter().zip(d.iter()).map(|(&i, &g)| (i, sw * g)));
            }
            entries.push((l.u_face(f), sw * 2.0 * u));
        }
        rows.push(Row::new(Term::Stress, sw * (sigma - weights.sigma_max + u * u), entries));
    }

    // kinks
    let sw = (weights.w_s * weights.kink_factor).sqrt();
    for &(_, a, b) in &topo.interior_edges {
        let (fa, fb) = (&faces[a.face], &faces[b.face]);
        let (na, nb) = (fa.normals[a.k], fb.normals[b.k]);
        let mut entries = Vec::new();
        if jac {
            for (side, ft, other) in [(a, fa, nb), (b, fb, na)] {
                let d = ft.dnormals.as_ref().expect("face derivatives")[side.k];
                let g = -(other.transpose() * d);
                let dofs = state.face_dofs(topo, side.face);
                entries.extend(dofs.iter().enumerate().map(|(c, &i)| (i, sw * g[(0, c)])));
            }
        }
        rows.push(Row::new(Term::Kink, sw * (1.0 - na.dot(&nb)), entries));
    }

    // tangent continuity at polyline joints
    let sw = weights.w_s.sqrt();
    for j in &topo.joints {
        let v = j.vertex;
        let mut x = [0.0; 17];
        let mut dofs = [0usize; 17];
        put(&mut x, 0, &state.vertices[v]);
        put_idx(&mut dofs, 0, l.vertex(v));
        for (h, &e) in j.edges.iter().enumerate() {
            let o = 3 + 7 * h;
            let nbr = topo.other(e, v);
            let end = topo.end_of(e, v);
            put(&mut x, o, &state.vertices[nbr]);
            put_idx(&mut dofs, o, l.vertex(nbr));
            put(&mut x, o + 3, &state.s[e]);
            put_idx(&mut dofs, o + 3, l.s(e));
            x[o + 6] = state.theta[e][end];
            dofs[o + 6] = l.theta(e, end);
        }
        rows.push(ad_row(Term::Tangent, sw, &dofs, &x, jac, |y| {
            joint_residual(&v3(y, 0), (&v3(y, 3), &v3(y, 6), y[9]), (&v3(y, 10), &v3(y, 13), y[16]))
        }));
    }

    // edge planes bisecting the neighbouring osculating planes
    for (ie, &curved) in topo.inner_edges.iter().zip(&frozen.curved) {
        if !curved {
            continue;
        }
        let mut x = [0.0; 15];
        let mut dofs = [0usize; 15];
        for (k, &v) in ie.vertices.iter().enumerate() {
            put(&mut x, 3 * k, &state.vertices[v]);
            put_idx(&mut dofs, 3 * k, l.vertex(v));
        }
        put(&mut x, 12, &state.s[ie.edge]);
        put_idx(&mut dofs, 12, l.s(ie.edge));
        rows.push(ad_row(Term::Bisector, sw, &dofs, &x, jac, |y| {
            bisector_residual(&v3(y, 0), &v3(y, 3), &v3(y, 6), &v3(y, 9), &v3(y, 12))
        }));
    }

    // edge tangents at singular vertices stay in the fitted plane
    for (&v, plane) in topo.singular.iter().zip(&frozen.planes) {
        for &e in &topo.vertex_edges[v] {
            let nbr = topo.other(e, v);
            let end = topo.end_of(e, v);
            let mut x = [0.0; 10];
            let mut dofs = [0usize; 10];
            put(&mut x, 0, &state.vertices[v]);
            put_idx(&mut dofs, 0, l.vertex(v));
            put(&mut x, 3, &state.vertices[nbr]);
            put_idx(&mut dofs, 3, l.vertex(nbr));
            put(&mut x, 6, &state.s[e]);
            put_idx(&mut dofs, 6, l.s(e));
            x[9] = state.theta[e][end];
            dofs[9] = l.theta(e, end);
            let n = *plane;
            rows.push(ad_row(Term::Singular, sw, &dofs, &x, jac, |y| {
                let t = end_tangent(&v3(y, 0), &v3(y, 3), &v3(y, 6), y[9]);
                t.x * n.x + t.y * n.y + t.z * n.z
            }));
        }
    }

    // fairness
    let sw = (weights.w_f * frozen.fairness_scale).sqrt();
    for &[a, b, c] in &topo.triples {
        let r = state.vertices[a] - state.vertices[b] * 2.0 + state.vertices[c];
        for k in 0..3 {
            let entries = if jac {
                vec![(l.vertex(a) + k, sw), (l.vertex(b) + k, -2.0 * sw), (l.vertex(c) + k, sw)]
            } else {
                Vec::new()
            };
            rows.push(Row::new(Term::Fairness, sw * r[k], entries));
        }
    }

    // proximity to the reference tangent planes
    let sw = weights.w_p.sqrt();
    for (v, foot) in frozen.feet.iter().enumerate() {
        if let Some(foot) = foot {
            let r = (state.vertices[v] - foot.point).dot(&foot.normal);
            let entries = if jac { (0..3).map(|k| (l.vertex(v) + k, sw * foot.normal[k])).collect() } else { Vec::new() };
            rows.push(Row::new(Term::Proximity, sw * r, entries));
        }
    }

    // domain constraints
    let sw = weights.w_c.sqrt();
    for e in 0..topo.edges.len() {
        for end in 0..2 {
            let (t, u) = (state.theta[e][end], state.u_theta[e][end]);
            let entries = if jac {
                vec![(l.theta(e, end), sw * 2.0 * t), (l.u_theta(e, end), sw * 2.0 * u)]
            } else {
                Vec::new()
            };
            rows.push(Row::new(Term::Angle, sw * (t * t - THETA_BOUND * THETA_BOUND + u * u), entries));
        }
    }
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        let mut x = [0.0; 9];
        let mut dofs = [0usize; 9];
        put(&mut x, 0, &state.vertices[a]);
        put_idx(&mut dofs, 0, l.vertex(a));
        put(&mut x, 3, &state.vertices[b]);
        put_idx(&mut dofs, 3, l.vertex(b));
        put(&mut x, 6, &state.s[e]);
        put_idx(&mut dofs, 6, l.s(e));
        for k in 0..2 {
            rows.push(ad_row(Term::EdgePlane, sw, &dofs, &x, jac, |y| {
                edge_plane_residuals(&v3(y, 0), &v3(y, 3), &v3(y, 6))[k]
            }));
        }
    }
    rows
}
