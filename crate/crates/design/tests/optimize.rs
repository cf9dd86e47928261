mod common;

use coldbend_design::{
    gauss_newton_iterate, initialize_design, OptimizeConfig, Problem, ReferenceSurface, THETA_BOUND,
};
use common::*;

#[test]
fn planar_grid_initializes_flat() {
    let model = ZeroTwist::constant_50();
    let mesh = planar_grid(3, 250.0);
    let st = initialize_design(&mesh, &model, None, &OptimizeConfig::default()).unwrap();
    for (s, t) in st.s.iter().zip(&st.theta) {
        assert!((s.z.abs() - 1.0).abs() < 1e-12, "{s:?}");
        assert_eq!(*t, [0.0, 0.0]);
    }
    for u in &st.u_face {
        assert!((u.abs() - 15f64.sqrt()).abs() < 1e-9, "{u}");
    }
    for u in &st.u_theta {
        assert!((u[0].abs() - THETA_BOUND).abs() < 1e-12);
    }
}

#[test]
fn cylinder_initialization_respects_the_angle_bound() {
    let model = ZeroTwist::constant_50();
    let mesh = cylinder_grid(5, 150.0, 700.0);
    let reference = ReferenceSurface::from_quad_mesh(&mesh.catmull_clark().unwrap().catmull_clark().unwrap()).unwrap();
    let st = initialize_design(&mesh, &model, Some(&reference), &OptimizeConfig::default()).unwrap();
    let p = Problem::new(&st, &model, Some(&reference), OptimizeConfig::default()).unwrap();
    let r = p.evaluate(&st).unwrap();
    assert!(r.energy.is_finite());
    assert_eq!(r.theta_violations, 0);
    assert!(st.theta.iter().flatten().all(|t| t.abs() <= THETA_BOUND));
    // the straight rulings meet the curved arcs; some angle must be used
    assert!(st.theta.iter().flatten().any(|t| t.abs() > 1e-3));
}

#[test]
fn a_zero_residual_state_is_a_fixed_point() {
    let model = ZeroTwist::constant_50();
    let mesh = planar_grid(3, 250.0);
    let reference = ReferenceSurface::from_quad_mesh(&mesh).unwrap();
    let mut st = initialize_design(&mesh, &model, Some(&reference), &OptimizeConfig::default()).unwrap();
    let before = st.clone();
    let cfg = OptimizeConfig { iterations: 3, ..Default::default() };
    let reports = gauss_newton_iterate(&mut st, &model, Some(&reference), &cfg).unwrap();
    for r in &reports {
        assert!(r.energy_start < 1e-20 && r.step_norm < 1e-9, "{} {}", r.energy_start, r.step_norm);
    }
    for (a, b) in st.vertices.iter().zip(&before.vertices) {
        assert!((a - b).norm() < 1e-9);
    }
}

#[test]
fn accepted_steps_never_increase_the_energy() {
    let mesh = saddle_grid(4, 250.0, 1100.0);
    let reference = ReferenceSurface::from_quad_mesh(&mesh.catmull_clark().unwrap()).unwrap();
    let seed = initialize_design(&mesh, &ZeroTwist::constant_50(), Some(&reference), &OptimizeConfig::default()).unwrap();
    let model = tiny_mdn(std::slice::from_ref(&seed), 3);
    let cfg = OptimizeConfig { iterations: 6, ..Default::default() };
    let mut st = initialize_design(&mesh, &model, Some(&reference), &cfg).unwrap();
    let e_init = Problem::new(&st, &model, Some(&reference), cfg.clone()).unwrap().evaluate(&st).unwrap().energy;
    let reports = gauss_newton_iterate(&mut st, &model, Some(&reference), &cfg).unwrap();
    assert_eq!(reports.len(), 6);
    assert!(reports.iter().any(|r| r.accepted));
    for r in &reports {
        assert!(r.energy_end <= r.energy_start, "iteration {}: {} -> {}", r.iteration, r.energy_start, r.energy_end);
        if !r.accepted {
            assert_eq!(r.energy_end, r.energy_start);
        }
    }
    assert!(reports.last().unwrap().energy_end < e_init);
}

#[test]
fn tangent_angles_stay_in_the_training_range_when_stress_pulls_them_out() {
    // stress falls as the tangent angles grow, so every step wants larger angles
    let model = ZeroTwist { sigma: |p| 200.0 - 1e2 * p[10..].iter().sum::<f64>() };
    let mesh = saddle_grid(3, 250.0, 1100.0);
    let reference = ReferenceSurface::from_quad_mesh(&mesh.catmull_clark().unwrap()).unwrap();
    let cfg = OptimizeConfig { iterations: 8, ..Default::default() };
    let mut st = initialize_design(&mesh, &model, Some(&reference), &cfg).unwrap();
    let reports = gauss_newton_iterate(&mut st, &model, Some(&reference), &cfg).unwrap();
    assert!(reports.iter().any(|r| r.accepted));
    assert!(st.theta.iter().flatten().all(|t| t.abs() <= THETA_BOUND));
    assert!(st.theta.iter().flatten().any(|t| t.abs() > 0.99 * THETA_BOUND));
}

#[test]
fn run_stops_when_the_callback_says_so() {
    let model = ZeroTwist::constant_50();
    let mesh = saddle_grid(2, 250.0, 1100.0);
    let mut st = initialize_design(&mesh, &model, None, &OptimizeConfig::default()).unwrap();
    let p = Problem::new(&st, &model, None, OptimizeConfig::default()).unwrap();
    let mut seen = 0;
    let reports = p
        .run(&mut st, |r, _| {
            seen += 1;
            r.iteration < 1
        })
        .unwrap();
    assert_eq!((reports.len(), seen), (2, 2));
}

#[test]
fn config_round_trips_through_json_with_defaults() {
    let cfg: OptimizeConfig = serde_json::from_str(r#"{"iterations": 7, "weights": {"sigma_max": 60.0}}"#).unwrap();
    assert_eq!(cfg.iterations, 7);
    assert_eq!(cfg.weights.sigma_max, 60.0);
    assert_eq!(cfg.weights.w_s, OptimizeConfig::default().weights.w_s);
    let back: OptimizeConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), serde_json::to_value(&cfg).unwrap());
}
