mod common;

use coldbend_core::geometry::QuadBaseMesh;
use coldbend_design::terms::Row;
use coldbend_design::{initialize_design, DesignState, OptimizeConfig, Problem, ReferenceSurface, Term};
use common::*;
use std::collections::BTreeMap;

fn reference_of(mesh: &QuadBaseMesh) -> ReferenceSurface {
    ReferenceSurface::from_quad_mesh(&mesh.catmull_clark().unwrap().catmull_clark().unwrap()).unwrap()
}

fn states(mesh: &QuadBaseMesh, reference: &ReferenceSurface, seeds: std::ops::Range<u64>) -> Vec<DesignState> {
    let base = initialize_design(mesh, &ZeroTwist::constant_50(), Some(reference), &OptimizeConfig::default()).unwrap();
    seeds
        .map(|seed| {
            let mut s = base.clone();
            jitter(&mut s, seed, 2.0);
            s
        })
        .collect()
}

fn step(i: usize, state: &DesignState) -> f64 {
    let l = state.layout();
    if i < l.s(0) {
        1e-4
    } else {
        1e-6
    }
}

/// Worst relative row error of the analytic Jacobian against central
/// differences, per term.
fn fd_errors(problem: &Problem, state: &DesignState) -> BTreeMap<Term, f64> {
    let values = problem.face_values(state).unwrap();
    let frozen = problem.frozen(state, &values, 3);
    let rows: Vec<Row> = problem.linearize(state, &frozen).unwrap();
    let x0 = state.to_vec();
    let n = x0.len();
    let mut fd = vec![vec![0.0; n]; rows.len()];
    let mut probe = state.clone();
    for i in 0..n {
        let h = step(i, state);
        let mut eval = |d: f64| {
            let mut x = x0.clone();
            x[i] += d;
            probe.set_from(&x);
            problem.rows(&probe, &frozen).unwrap()
        };
        let (rp, rm) = (eval(h), eval(-h));
        assert_eq!(rp.len(), rows.len());
        for r in 0..rows.len() {
            fd[r][i] = (rp[r].value - rm[r].value) / (2.0 * h);
        }
    }
    let mut worst = BTreeMap::new();
    for (r, row) in rows.iter().enumerate() {
        let mut an = vec![0.0; n];
        for &(i, g) in &row.entries {
            an[i] = g;
        }
        let scale = an.iter().chain(fd[r].iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        if scale < 1e-12 {
            continue;
        }
        let err = an.iter().zip(&fd[r]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        let w = worst.entry(row.term).or_insert(0.0f64);
        *w = w.max(err);
    }
    worst
}

fn check(mesh: QuadBaseMesh, seeds: std::ops::Range<u64>, expect: &[Term]) {
    let reference = reference_of(&mesh);
    let sts = states(&mesh, &reference, seeds);
    let model = tiny_mdn(&sts, 5);
    for st in &sts {
        let problem = Problem::new(st, &model, Some(&reference), OptimizeConfig::default()).unwrap();
        let errs = fd_errors(&problem, st);
        for t in expect {
            assert!(errs.contains_key(t), "no {t:?} rows");
        }
        for (t, e) in &errs {
            assert!(*e < 1e-4, "{t:?}: relative Jacobian error {e:.2e}");
        }
    }
}

#[test]
fn every_block_matches_central_differences_on_a_saddle() {
    check(
        saddle_grid(3, 300.0, 1500.0),
        0..3,
        &[Term::Stress, Term::Kink, Term::Tangent, Term::Bisector, Term::Fairness, Term::Proximity, Term::Angle, Term::EdgePlane],
    );
}

#[test]
fn singular_vertex_rows_match_central_differences() {
    check(star_mesh(400.0), 10..12, &[Term::Singular, Term::Stress, Term::Kink]);
}
