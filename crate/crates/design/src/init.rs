//! Initial design variables from a base mesh.
//!
//! Edge planes bisect the discrete osculating planes of the polylines through
//! the edge (falling back to the mean face normal on straight polylines),
//! tangent angles point the curve ends as close to the reference tangent
//! planes as the angle bound allows, and slacks close their constraint gaps.

use crate::optimize::{OptimizeConfig, Problem};
use crate::reference::ReferenceSurface;
use crate::state::DesignState;
use crate::surrogate::Surrogate;
use crate::terms::{COLLINEAR_SINE, THETA_BOUND};
use crate::topology::Topology;
use crate::Result;
use coldbend_core::geometry::QuadBaseMesh;
use coldbend_core::P3;

/// Osculating-plane normal at `b` for the polyline `a, b, c`, oriented by the
/// traversal direction; `None` where the polyline is straight.
fn osculating(a: &P3, b: &P3, c: &P3) -> Option<P3> {
    let (u, v) = (b - a, c - b);
    let n = u.cross(&v);
    (n.norm() > COLLINEAR_SINE * u.norm() * v.norm()).then(|| n.normalize())
}

/// Edge-plane vectors from the bisector construction.
pub fn initial_planes(topo: &Topology, vertices: &[P3]) -> Vec<P3> {
    let ne = topo.edges.len();
    let mut osc_sum = vec![P3::zeros(); ne];
    let mut have = vec![false; ne];
    for pl in &topo.polylines {
        let n = pl.vertices.len();
        let at = |i: isize| -> Option<P3> {
            if pl.closed {
                Some(vertices[pl.vertices[i.rem_euclid(n as isize) as usize]])
            } else if i >= 0 && (i as usize) < n {
                Some(vertices[pl.vertices[i as usize]])
            } else {
                None
            }
        };
        let osc = |i: isize| match (at(i - 1), at(i), at(i + 1)) {
            (Some(a), Some(b), Some(c)) => osculating(&a, &b, &c),
            _ => None,
        };
        for (j, &e) in pl.edges.iter().enumerate() {
            for nrm in [osc(j as isize), osc(j as isize + 1)].into_iter().flatten() {
                osc_sum[e] += nrm;
                have[e] = true;
            }
        }
    }
    topo.edges
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let d = (vertices[b] - vertices[a]).normalize();
            let face_n: P3 = topo.edge_sides[e]
                .iter()
                .map(|s| {
                    let [p, q, r, t] = topo.faces[s.face].map(|i| vertices[i]);
                    (r - p).cross(&(t - q)).normalize()
                })
                .sum();
            let fallback = || (face_n - d * face_n.dot(&d)).normalize();
            let s = if have[e] {
                let m = osc_sum[e] - d * osc_sum[e].dot(&d);
                let s = d.cross(&m);
                if m.norm() > 1e-9 {
                    s.normalize()
                } else {
                    fallback()
                }
            } else {
                fallback()
            };
            if s.dot(&face_n) < 0.0 {
                -s
            } else {
                s
            }
        })
        .collect()
}

/// Angle in `[-bound, bound]` whose tangent `e cosθ + s sinθ` is closest to
/// the plane with normal `n`.
pub fn tangent_plane_angle(e: &P3, s: &P3, n: &P3, bound: f64) -> f64 {
    let (en, sn) = (e.dot(n), s.dot(n));
    let theta = if sn.abs() > 1e-300 { (-en / sn).atan() } else { -en.signum() * bound };
    theta.clamp(-bound, bound)
}

/// Full initialization. Without a reference, the base mesh's vertex normals
/// stand in for the reference tangent planes.
pub fn initialize_design(
    mesh: &QuadBaseMesh,
    model: &dyn Surrogate,
    reference: Option<&ReferenceSurface>,
    config: &OptimizeConfig,
) -> Result<DesignState> {
    let topo = Topology::new(mesh);
    let v = &mesh.vertices;
    let s = initial_planes(&topo, v);
    let normals: Vec<P3> = match reference {
        Some(r) => v.iter().map(|x| r.closest(x).normal).collect(),
        None => mesh.vertex_normals(),
    };
    let theta: Vec<[f64; 2]> = topo
        .edges
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let at = |x: usize, y: usize| tangent_plane_angle(&(v[y] - v[x]).normalize(), &s[e], &normals[x], THETA_BOUND);
            [at(a, b), at(b, a)]
        })
        .collect();
    let nf = mesh.faces.len();
    let ne = topo.edges.len();
    let mut state = DesignState {
        vertices: v.clone(),
        faces: mesh.faces.clone(),
        s,
        theta,
        u_face: vec![0.0; nf],
        u_theta: vec![[0.0; 2]; ne],
        modes: vec![0; nf],
    };
    let problem = Problem::new(&state, model, reference, config.clone())?;
    let values = problem.face_values(&state)?;
    state.modes = problem.select_modes(&state, &values);
    let frozen = problem.frozen(&state, &values, 0);
    problem.minimize_slacks(&mut state, &values, &frozen);
    Ok(state)
}
