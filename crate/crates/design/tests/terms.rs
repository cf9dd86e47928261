mod common;

use coldbend_core::geometry::{compact_encode, QuadBaseMesh};
use coldbend_core::P3;
use coldbend_design::terms::{bisector_residual, edge_plane_residuals, joint_residual, Row};
use coldbend_design::{
    initialize_design, DesignState, DesignWeights, OptimizeConfig, Problem, ReferenceSurface, Surrogate, Term,
    THETA_BOUND,
};
use coldbend_surrogate::MdnModel;
use common::*;
use nalgebra::{Rotation3, Vector3};

fn rows_of(problem: &Problem, state: &DesignState, iteration: usize) -> Vec<Row> {
    let values = problem.face_values(state).unwrap();
    let frozen = problem.frozen(state, &values, iteration);
    problem.rows_with(state, &frozen, &values)
}

fn of(rows: &[Row], t: Term) -> Vec<f64> {
    rows.iter().filter(|r| r.term == t).map(|r| r.value).collect()
}

fn straight(state: &mut DesignState) {
    state.theta.iter_mut().for_each(|t| *t = [0.0; 2]);
}

fn init(mesh: &QuadBaseMesh, model: &dyn Surrogate, reference: Option<&ReferenceSurface>) -> DesignState {
    initialize_design(mesh, model, reference, &OptimizeConfig::default()).unwrap()
}

#[test]
fn stress_slack_absorbs_the_margin() {
    let mesh = planar_grid(1, 300.0);
    let w = DesignWeights::default();
    for (model, u, want) in [
        (ZeroTwist { sigma: |_| 65.0 }, 0.0, 0.0),
        (ZeroTwist { sigma: |_| 56.0 }, 3.0, 0.0),
        (ZeroTwist { sigma: |_| 70.0 }, 0.0, 5.0),
    ] {
        let mut st = init(&mesh, &model, None);
        st.u_face[0] = u;
        let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
        let r = of(&rows_of(&p, &st, 0), Term::Stress);
        assert_eq!(r.len(), 1);
        assert!((r[0] - w.w_sigma.sqrt() * want).abs() < 1e-12, "{}", r[0]);
    }
}

/// Two flat quads meeting at `angle` along their shared edge.
fn folded(angle: f64) -> QuadBaseMesh {
    let h = 300.0;
    let (c, s) = (angle.cos(), angle.sin());
    let v = vec![
        P3::new(0.0, 0.0, 0.0),
        P3::new(h, 0.0, 0.0),
        P3::new(h, h, 0.0),
        P3::new(0.0, h, 0.0),
        P3::new(h + h * c, 0.0, h * s),
        P3::new(h + h * c, h, h * s),
    ];
    QuadBaseMesh::new(v, vec![[0, 1, 2, 3], [1, 4, 5, 2]]).unwrap()
}

#[test]
fn kink_residual_follows_the_normal_angle() {
    let model = ZeroTwist::constant_50();
    let w = DesignWeights::default();
    for (angle, want) in [(0.0, 0.0), (std::f64::consts::FRAC_PI_2, 1.0), (0.3, 1.0 - 0.3f64.cos())] {
        let mesh = folded(angle);
        let mut st = init(&mesh, &model, None);
        straight(&mut st);
        let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
        let r = of(&rows_of(&p, &st, 0), Term::Kink);
        assert_eq!(r.len(), 1);
        let expect = (w.w_s * 0.1).sqrt() * want;
        assert!((r[0] - expect).abs() < 1e-12, "angle {angle}: {} vs {expect}", r[0]);
        let report = p.evaluate(&st).unwrap();
        assert!((report.mean_kink_deg - angle.to_degrees()).abs() < 1e-6);
    }
}

#[test]
fn joint_residual_is_zero_for_straight_and_two_for_a_cusp() {
    let v = P3::zeros();
    let s = P3::z();
    let (a, b) = (P3::new(-100.0, 0.0, 0.0), P3::new(120.0, 0.0, 0.0));
    assert!(joint_residual(&v, (&a, &s, 0.0), (&b, &s, 0.0)).abs() < 1e-15);
    // the same bend angle on both sides keeps the tangents anti-parallel
    assert!(joint_residual(&v, (&a, &s, 0.05), (&b, &s, -0.05)).abs() < 1e-15);
    assert!((joint_residual(&v, (&a, &s, 0.0), (&a, &s, 0.0)) - 2.0).abs() < 1e-15);

    let model = ZeroTwist::constant_50();
    let mut st = init(&planar_grid(3, 200.0), &model, None);
    straight(&mut st);
    let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
    let r = of(&rows_of(&p, &st, 0), Term::Tangent);
    assert_eq!(r.len(), 2 * 4 * 2);
    assert!(r.iter().all(|x| x.abs() < 1e-15));
}

#[test]
fn circular_arc_edge_planes_bisect_the_osculating_planes() {
    let model = ZeroTwist::constant_50();
    let mesh = cylinder_grid(4, 150.0, 900.0);
    let st = init(&mesh, &model, None);
    let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
    let r = of(&rows_of(&p, &st, 0), Term::Bisector);
    // the arcs have interior edges, the straight rulings none
    assert_eq!(r.len(), 5 * 2);
    assert!(r.iter().all(|x| x.abs() < 1e-12), "{r:?}");
    // the edge planes of an arc are its own plane
    for (e, &[a, b]) in p.topo.edges.iter().enumerate() {
        let d = st.vertices[b] - st.vertices[a];
        if d.y.abs() < 1e-9 {
            assert!(st.s[e].y.abs() < 1e-12);
        }
    }
    // and for any circle with a consistent plane vector
    let pts: Vec<P3> = (0..4).map(|i| P3::new((0.3 * i as f64).cos(), (0.3 * i as f64).sin(), 0.0) * 500.0).collect();
    let s = (pts[2] - pts[1]).cross(&P3::z()).normalize();
    assert!(bisector_residual(&pts[0], &pts[1], &pts[2], &pts[3], &s).abs() < 1e-15);
    assert!((bisector_residual(&pts[0], &pts[1], &pts[2], &pts[3], &P3::z()) - 2.0).abs() < 1e-12);
}

#[test]
fn fairness_vanishes_on_affine_grids_and_matches_the_direct_formula() {
    let model = ZeroTwist::constant_50();
    let (d1, d2, o) = (P3::new(180.0, 20.0, -35.0), P3::new(-10.0, 190.0, 40.0), P3::new(5.0, -3.0, 7.0));
    let mesh = QuadBaseMesh::grid(4, 3, |i, j| o + d1 * i as f64 + d2 * j as f64).unwrap();
    let mut st = init(&mesh, &model, None);
    let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
    let r = of(&rows_of(&p, &st, 0), Term::Fairness);
    assert!(!r.is_empty());
    assert!(r.iter().all(|x| x.abs() < 1e-9), "{r:?}");

    jitter(&mut st, 4, 10.0);
    for it in [0, 5] {
        let got = of(&rows_of(&p, &st, it), Term::Fairness);
        let sw = (0.1f64 * 0.9f64.powi(it as i32)).sqrt();
        let mut want = Vec::new();
        for pl in mesh.polylines() {
            for w in pl.vertices.windows(3) {
                let r = st.vertices[w[0]] - st.vertices[w[1]] * 2.0 + st.vertices[w[2]];
                want.extend(r.iter().map(|x| sw * x));
            }
        }
        assert_eq!(got.len(), want.len());
        assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn proximity_measures_the_offset_from_the_tangent_plane() {
    let model = ZeroTwist::constant_50();
    let mesh = planar_grid(2, 200.0);
    let reference = ReferenceSurface::from_quad_mesh(&planar_grid(8, 50.0)).unwrap();
    let mut st = init(&mesh, &model, Some(&reference));
    let p = Problem::new(&st, &model, Some(&reference), OptimizeConfig::default()).unwrap();
    let values = p.face_values(&st).unwrap();
    let frozen = p.frozen(&st, &values, 0);
    assert!(of(&p.rows_with(&st, &frozen, &values), Term::Proximity).iter().all(|x| *x == 0.0));

    st.vertices[4].z += 1.0;
    let r = of(&p.rows_with(&st, &frozen, &values), Term::Proximity);
    assert!((r[4] - 0.1f64.sqrt()).abs() < 1e-15);
    st.vertices[4].z -= 1.0;

    // gliding along the plane keeps the residual at zero
    st.vertices[4] += P3::new(30.0, -12.0, 0.0);
    assert!(of(&p.rows_with(&st, &frozen, &values), Term::Proximity).iter().all(|x| *x == 0.0));
}

#[test]
fn domain_constraints_vanish_on_their_boundaries() {
    let model = ZeroTwist::constant_50();
    let mut st = init(&planar_grid(1, 300.0), &model, None);
    st.theta[0] = [THETA_BOUND, 0.0];
    st.u_theta[0] = [0.0, THETA_BOUND];
    let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
    let r = of(&rows_of(&p, &st, 0), Term::Angle);
    assert!(r[0].abs() < 1e-18 && r[1].abs() < 1e-18);
    let e = edge_plane_residuals(&P3::zeros(), &P3::new(3.0, 4.0, 0.0), &P3::z());
    assert_eq!(e, [0.0, 0.0]);
    let e = edge_plane_residuals(&P3::zeros(), &P3::new(3.0, 4.0, 0.0), &(P3::new(0.6, 0.8, 0.0) * 2.0));
    assert!((e[0] - 2.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
}

#[test]
fn planar_grid_with_a_planar_reference_has_no_residual() {
    let model = ZeroTwist::constant_50();
    let mesh = planar_grid(4, 250.0);
    let reference = ReferenceSurface::from_quad_mesh(&mesh).unwrap();
    let st = init(&mesh, &model, Some(&reference));
    let p = Problem::new(&st, &model, Some(&reference), OptimizeConfig::default()).unwrap();
    let rows = rows_of(&p, &st, 0);
    for t in [Term::Stress, Term::Kink, Term::Tangent, Term::Fairness, Term::Proximity, Term::Angle, Term::EdgePlane] {
        assert!(rows.iter().any(|r| r.term == t), "{t:?} missing");
    }
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.value.abs()));
    assert!(worst < 1e-12, "largest residual {worst:e}");
}

/// Energy recomputed term by term from the panel encodings and predicted
/// patches, without going through the row assembly.
fn independent_energy(p: &Problem, model: &dyn Surrogate, st: &DesignState, iteration: usize) -> f64 {
    let w = &p.config.weights;
    let topo = &p.topo;
    let values = p.face_values(st).unwrap();
    let frozen = p.frozen(st, &values, iteration);
    let mut e = 0.0;
    let mut slot_normals = Vec::new();
    for f in 0..topo.faces.len() {
        let b = st.face_boundary(topo, f);
        let enc = compact_encode(&b).unwrap();
        let pred = model.predict(&[enc.compact.p]).unwrap().remove(0);
        let m = &pred.modes[st.modes[f]];
        e += w.w_sigma * (m.sigma - w.sigma_max + st.u_face[f].powi(2)).powi(2);
        let frame = enc.canonical.frame().unwrap();
        let interior: [P3; 4] = std::array::from_fn(|k| frame.to_world(&P3::new(m.shape[3 * k], m.shape[3 * k + 1], m.shape[3 * k + 2])));
        let patch = enc.canonical.patch(&interior);
        let sign = if enc.info.transposed { -1.0 } else { 1.0 };
        let normals: [P3; 4] = std::array::from_fn(|k| {
            let c = b.curves()[k];
            let mid = (c[0] + c[1] * 3.0 + c[2] * 3.0 + c[3]) / 8.0;
            let uv = [(0.5, 0.0), (1.0, 0.5), (0.5, 1.0), (0.0, 0.5)]
                .into_iter()
                .min_by(|a, b| (patch.position(a.0, a.1) - mid).norm().total_cmp(&(patch.position(b.0, b.1) - mid).norm()))
                .unwrap();
            patch.eval(uv.0, uv.1).unwrap().normal * sign
        });
        slot_normals.push(normals);
    }
    for &(_, a, b) in &topo.interior_edges {
        e += w.w_s * 0.1 * (1.0 - slot_normals[a.face][a.k].dot(&slot_normals[b.face][b.k])).powi(2);
    }
    let inward = |v: usize, e: usize| {
        let n = topo.other(e, v);
        let d = (st.vertices[n] - st.vertices[v]).normalize();
        let t = st.theta[e][topo.end_of(e, v)];
        d * t.cos() + st.s[e] * t.sin()
    };
    for j in &topo.joints {
        e += w.w_s * (inward(j.vertex, j.edges[0]).dot(&inward(j.vertex, j.edges[1])) + 1.0).powi(2);
    }
    for (ie, &on) in topo.inner_edges.iter().zip(&frozen.curved) {
        if on {
            let [a, b, c, d] = ie.vertices.map(|i| st.vertices[i]);
            let n1 = (b - a).cross(&(c - b)).normalize();
            let n2 = (c - b).cross(&(d - c)).normalize();
            e += w.w_s * st.s[ie.edge].dot(&(n1 + n2)).powi(2);
        }
    }
    for (&v, n) in topo.singular.iter().zip(&frozen.planes) {
        for &ed in &topo.vertex_edges[v] {
            e += w.w_s * inward(v, ed).dot(n).powi(2);
        }
    }
    for t in &topo.triples {
        let r = st.vertices[t[0]] - st.vertices[t[1]] * 2.0 + st.vertices[t[2]];
        e += w.w_f * w.fairness_decay.powi(iteration as i32) * r.norm_squared();
    }
    for (v, foot) in frozen.feet.iter().enumerate() {
        let f = foot.unwrap();
        e += w.w_p * (st.vertices[v] - f.point).dot(&f.normal).powi(2);
    }
    for (ed, &[a, b]) in topo.edges.iter().enumerate() {
        for end in 0..2 {
            e += w.w_c * (st.theta[ed][end].powi(2) - THETA_BOUND.powi(2) + st.u_theta[ed][end].powi(2)).powi(2);
        }
        let s = st.s[ed];
        e += w.w_c * (s.dot(&(st.vertices[b] - st.vertices[a]).normalize()).powi(2) + (s.norm_squared() - 1.0).powi(2));
    }
    e
}

fn curved_setup(mesh: &QuadBaseMesh) -> (ReferenceSurface, DesignState, MdnModel) {
    let reference = ReferenceSurface::from_quad_mesh(&mesh.catmull_clark().unwrap()).unwrap();
    let mut st = init(mesh, &ZeroTwist::constant_50(), Some(&reference));
    let model = tiny_mdn(std::slice::from_ref(&st), 9);
    // keep edge planes valid boundaries but move everything else
    for (i, t) in st.theta.iter_mut().enumerate() {
        *t = [0.03 * ((i % 5) as f64 - 2.0), -0.02 * ((i % 3) as f64 - 1.0)];
    }
    for (i, u) in st.u_face.iter_mut().enumerate() {
        *u = 0.5 * i as f64;
    }
    st.modes.iter_mut().enumerate().for_each(|(i, m)| *m = i % 2);
    (reference, st, model)
}

#[test]
fn energy_equals_the_weighted_sum_of_independently_evaluated_terms() {
    for mesh in [saddle_grid(3, 280.0, 1200.0), star_mesh(350.0)] {
        let (reference, st, model) = curved_setup(&mesh);
        let p = Problem::new(&st, &model, Some(&reference), OptimizeConfig::default()).unwrap();
        for it in [0, 2] {
            let values = p.face_values(&st).unwrap();
            let frozen = p.frozen(&st, &values, it);
            let (e, b) = p.energy(&st, &frozen).unwrap();
            let want = independent_energy(&p, &model, &st, it);
            assert!((e - want).abs() <= 1e-10 * want, "{e} vs {want}");
            assert!((b.total() - e).abs() <= 1e-12 * e);
        }
    }
}

#[test]
fn rigid_motion_leaves_every_residual_unchanged() {
    let mesh = saddle_grid(3, 280.0, 1200.0);
    let (reference, st, model) = curved_setup(&mesh);
    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(0.3, -1.0, 0.6)), 1.1);
    let r = *rot.matrix();
    let t = P3::new(1234.0, -567.0, 89.0);
    let mut moved = st.clone();
    moved.vertices.iter_mut().for_each(|v| *v = r * *v + t);
    moved.s.iter_mut().for_each(|s| *s = r * *s);
    let moved_ref = reference.transformed(&r, &t).unwrap();
    let a = rows_of(&Problem::new(&st, &model, Some(&reference), OptimizeConfig::default()).unwrap(), &st, 1);
    let b = rows_of(&Problem::new(&moved, &model, Some(&moved_ref), OptimizeConfig::default()).unwrap(), &moved, 1);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.term, y.term);
        // fairness residuals are vectors and rotate with the geometry
        if x.term != Term::Fairness {
            assert!((x.value - y.value).abs() < 1e-9, "{:?}: {} vs {}", x.term, x.value, y.value);
        }
    }
    let norms = |rows: &[Row]| -> Vec<f64> {
        rows.iter().filter(|r| r.term == Term::Fairness).map(|r| r.value).collect::<Vec<_>>().chunks(3).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    };
    for (x, y) in norms(&a).iter().zip(norms(&b)) {
        assert!((x - y).abs() < 1e-9);
    }
}
