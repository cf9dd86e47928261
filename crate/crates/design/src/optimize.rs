//! Gauss-Newton with Levenberg-Marquardt damping on the design energy.
//!
//! Each iteration freezes the linearization context (closest points, planes,
//! out-of-domain stresses), minimizes the slacks exactly, re-selects the
//! per-face modes if that does not raise the energy, and then takes one damped
//! step through the sparse normal equations.

use crate::face::{face_values, linearize_face, FaceValues, NX};
use crate::reference::ReferenceSurface;
use crate::state::DesignState;
use crate::surrogate::Surrogate;
use crate::terms::{assemble, energy_of, Breakdown, DesignWeights, FaceTerm, Frozen, Row, THETA_BOUND};
use crate::topology::Topology;
use crate::{Error, Result};
use coldbend_core::geometry::THETA_MAX;
use coldbend_core::linalg::{EnvelopeCholesky, Triplets};
use coldbend_core::P3;
use coldbend_surrogate::{select, Criterion, Mode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeCriterion {
    /// Mode whose edge normals deviate least from the base-mesh edge normals.
    #[default]
    Smoothest,
    MinStress,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub weights: DesignWeights,
    pub iterations: usize,
    pub criterion: ModeCriterion,
    /// Initial damping.
    pub lambda: f64,
    /// Damped solves per iteration before giving up on a step.
    pub max_tries: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { weights: DesignWeights::default(), iterations: 20, criterion: ModeCriterion::default(), lambda: 1e-3, max_tries: 12 }
    }
}

/// Design quality at one state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub energy: f64,
    pub breakdown: Breakdown,
    pub faces: usize,
    /// Faces with σ̂ above the stress bound.
    pub violating: usize,
    pub max_sigma: f64,
    pub mean_sigma: f64,
    pub mean_kink_deg: f64,
    pub max_kink_deg: f64,
    /// Tangent angles beyond the 5° domain.
    pub theta_violations: usize,
    pub out_of_domain: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Energy after freezing, slack minimization and mode selection.
    pub energy_start: f64,
    pub energy_end: f64,
    pub accepted: bool,
    pub tries: usize,
    pub lambda: f64,
    pub step_norm: f64,
    pub modes_changed: usize,
    pub report: DesignReport,
}

pub struct Problem<'a> {
    pub topo: Topology,
    pub model: &'a dyn Surrogate,
    pub reference: Option<&'a ReferenceSurface>,
    pub config: OptimizeConfig,
}

/// Unit normal of the base quad from its diagonals.
fn quad_normal(state: &DesignState, face: &[usize; 4]) -> P3 {
    let [a, b, c, d] = face.map(|i| state.vertices[i]);
    (c - a).cross(&(d - b)).try_normalize(1e-300).unwrap_or(P3::z())
}

/// Per edge, the mean normal of the adjacent base quads made orthogonal to
/// the edge.
pub fn edge_normals(topo: &Topology, state: &DesignState) -> Vec<P3> {
    topo.edges
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let d = (state.vertices[b] - state.vertices[a]).normalize();
            let n: P3 = topo.edge_sides[e].iter().map(|s| quad_normal(state, &topo.faces[s.face])).sum();
            (n - d * n.dot(&d)).try_normalize(1e-300).unwrap_or(n)
        })
        .collect()
}

impl<'a> Problem<'a> {
    pub fn new(
        state: &DesignState,
        model: &'a dyn Surrogate,
        reference: Option<&'a ReferenceSurface>,
        config: OptimizeConfig,
    ) -> Result<Self> {
        config.weights.validate()?;
        let topo = state.topology()?;
        let (ne, nf) = (topo.edges.len(), topo.faces.len());
        if state.s.len() != ne
            || state.theta.len() != ne
            || state.u_theta.len() != ne
            || state.u_face.len() != nf
            || state.modes.len() != nf
        {
            return Err(Error::Invalid("design state does not match its mesh".into()));
        }
        Ok(Self { topo, model, reference, config })
    }

    pub fn face_locals(&self, state: &DesignState) -> Vec<[f64; NX]> {
        (0..self.topo.faces.len()).map(|f| state.face_local(&self.topo, f)).collect()
    }

    pub fn face_values(&self, state: &DesignState) -> Result<Vec<FaceValues>> {
        face_values(self.model, &self.face_locals(state))
    }

    pub fn frozen(&self, state: &DesignState, values: &[FaceValues], iteration: usize) -> Frozen {
        Frozen::new(&self.topo, state, self.reference, values, &|p| self.model.in_domain(p), iteration, &self.config.weights)
    }

    fn face_terms(&self, state: &DesignState, values: &[FaceValues]) -> Vec<FaceTerm> {
        let xs = self.face_locals(state);
        values.iter().zip(&xs).enumerate().map(|(f, (v, x))| FaceTerm::from_values(v, x, state.modes[f])).collect()
    }

    /// Residuals without derivatives, from the given predictions.
    pub fn rows_with(&self, state: &DesignState, frozen: &Frozen, values: &[FaceValues]) -> Vec<Row> {
        assemble(&self.topo, &self.config.weights, frozen, state, &self.face_terms(state, values), false)
    }

    /// Residuals without derivatives, with fresh predictions.
    pub fn rows(&self, state: &DesignState, frozen: &Frozen) -> Result<Vec<Row>> {
        let values = self.face_values(state)?;
        Ok(self.rows_with(state, frozen, &values))
    }

    pub fn energy(&self, state: &DesignState, frozen: &Frozen) -> Result<(f64, Breakdown)> {
        Ok(energy_of(&self.rows(state, frozen)?))
    }

    /// Residuals with their gradients, including the surrogate chain.
    pub fn linearize(&self, state: &DesignState, frozen: &Frozen) -> Result<Vec<Row>> {
        let xs = self.face_locals(state);
        let faces: Vec<FaceTerm> = xs
            .par_iter()
            .enumerate()
            .map(|(f, x)| linearize_face(self.model, x, state.modes[f]).map(|j| FaceTerm::from_jacobian(&j)))
            .collect::<Result<_>>()?;
        Ok(assemble(&self.topo, &self.config.weights, frozen, state, &faces, true))
    }

    fn sigma_of(&self, values: &[FaceValues], frozen: &Frozen, f: usize, mode: usize) -> f64 {
        match &frozen.frozen_sigma[f] {
            Some(s) => s[mode],
            None => values[f].prediction.modes[mode].sigma,
        }
    }

    /// Sets every slack to its exact minimizer.
    pub fn minimize_slacks(&self, state: &mut DesignState, values: &[FaceValues], frozen: &Frozen) {
        let smax = self.config.weights.sigma_max;
        for f in 0..state.u_face.len() {
            state.u_face[f] = (smax - self.sigma_of(values, frozen, f, state.modes[f])).max(0.0).sqrt();
        }
        for (u, t) in state.u_theta.iter_mut().zip(&state.theta) {
            for end in 0..2 {
                u[end] = (THETA_BOUND * THETA_BOUND - t[end] * t[end]).max(0.0).sqrt();
            }
        }
    }

    /// Preferred admissible mode of every face under the configured criterion.
    pub fn select_modes(&self, state: &DesignState, values: &[FaceValues]) -> Vec<usize> {
        let en = edge_normals(&self.topo, state);
        let xs = self.face_locals(state);
        values
            .iter()
            .enumerate()
            .map(|(f, v)| match self.config.criterion {
                ModeCriterion::MinStress => select(&v.prediction, &Criterion::MinStress).best_component(),
                ModeCriterion::Smoothest => {
                    let refs: [P3; 4] = std::array::from_fn(|k| en[self.topo.face_edges[f][k].0]);
                    let score = |m: &Mode| {
                        let n = crate::face::face_normals(&xs[f], &m.shape, v.transpose);
                        (0..4).map(|k| (1.0 - n[k].dot(&refs[k])).powi(2)).sum::<f64>()
                    };
                    select(&v.prediction, &Criterion::Score(&score)).best_component()
                }
            })
            .collect()
    }

    pub fn report(&self, state: &DesignState, values: &[FaceValues], frozen: &Frozen) -> DesignReport {
        let (energy, breakdown) = energy_of(&self.rows_with(state, frozen, values));
        let nf = values.len();
        let sig: Vec<f64> = (0..nf).map(|f| values[f].prediction.modes[state.modes[f]].sigma).collect();
        let xs = self.face_locals(state);
        let normals: Vec<[P3; 4]> = (0..nf).map(|f| values[f].normals(&xs[f], state.modes[f])).collect();
        let kinks: Vec<f64> = self
            .topo
            .interior_edges
            .iter()
            .map(|&(_, a, b)| normals[a.face][a.k].dot(&normals[b.face][b.k]).clamp(-1.0, 1.0).acos().to_degrees())
            .collect();
        let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        DesignReport {
            energy,
            breakdown,
            faces: nf,
            violating: sig.iter().filter(|&&s| s > self.config.weights.sigma_max).count(),
            max_sigma: sig.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean_sigma: mean(&sig),
            mean_kink_deg: mean(&kinks),
            max_kink_deg: kinks.iter().cloned().fold(0.0, f64::max),
            theta_violations: state.theta.iter().flatten().filter(|t| t.abs() > THETA_MAX + 1e-12).count(),
            out_of_domain: values.iter().filter(|v| !self.model.in_domain(&v.p)).count(),
        }
    }

    /// Current quality without an iteration context.
    pub fn evaluate(&self, state: &DesignState) -> Result<DesignReport> {
        let values = self.face_values(state)?;
        let frozen = self.frozen(state, &values, 0);
        Ok(self.report(state, &values, &frozen))
    }

    /// One Gauss-Newton/LM iteration; `lambda` carries the damping across
    /// iterations.
    pub fn iterate(&self, state: &mut DesignState, iteration: usize, lambda: &mut f64) -> Result<IterationReport> {
        let values = self.face_values(state)?;
        let frozen = self.frozen(state, &values, iteration);
        self.minimize_slacks(state, &values, &frozen);
        let mut e0 = energy_of(&self.rows_with(state, &frozen, &values)).0;

        let mut modes_changed = 0;
        let cand = self.select_modes(state, &values);
        if cand != state.modes {
            let mut trial = state.clone();
            trial.modes = cand;
            self.minimize_slacks(&mut trial, &values, &frozen);
            let e1 = energy_of(&self.rows_with(&trial, &frozen, &values)).0;
            if e1 <= e0 {
                modes_changed = trial.modes.iter().zip(&state.modes).filter(|(a, b)| a != b).count();
                *state = trial;
                e0 = e1;
            }
        }

        let rows = self.linearize(state, &frozen)?;
        let n = state.layout().len();
        let mut t = Triplets::with_capacity(n, rows.iter().map(|r| r.entries.len() * (r.entries.len() + 1) / 2).sum());
        let mut g = vec![0.0; n];
        for r in &rows {
            for (a, &(i, gi)) in r.entries.iter().enumerate() {
                g[i] += gi * r.value;
                for &(j, gj) in &r.entries[..=a] {
                    t.push(i, j, gi * gj);
                }
            }
        }
        let h = t.build();
        let diag = h.diag();
        let floor = 1e-12 * diag.iter().cloned().fold(0.0, f64::max) + 1e-300;
        let d: Vec<f64> = diag.iter().map(|&x| x.max(floor)).collect();
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let x0 = state.to_vec();

        let (mut accepted, mut tries, mut factored, mut step_norm) = (false, 0, false, 0.0);
        let mut e_end = e0;
        while tries < self.config.max_tries {
            tries += 1;
            let shift: Vec<f64> = d.iter().map(|x| *lambda * x).collect();
            let Ok(chol) = EnvelopeCholesky::factor(&h, Some(&shift)) else {
                *lambda = (*lambda * 4.0).min(1e12);
                continue;
            };
            factored = true;
            let delta = chol.solve(&rhs)?;
            let mut trial = state.clone();
            trial.set_from(&x0.iter().zip(&delta).map(|(a, b)| a + b).collect::<Vec<_>>());
            // projected step: tangent angles never leave the surrogate's training range
            trial.theta.iter_mut().flatten().for_each(|t| *t = t.clamp(-THETA_BOUND, THETA_BOUND));
            let e1 = self.energy(&trial, &frozen).map(|e| e.0).unwrap_or(f64::INFINITY);
            if e1.is_finite() && e1 <= e0 {
                *state = trial;
                e_end = e1;
                accepted = true;
                step_norm = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
                *lambda = (*lambda * 0.5).max(1e-12);
                break;
            }
            *lambda = (*lambda * 4.0).min(1e12);
        }
        if !factored {
            return Err(Error::Numerical(format!(
                "normal equations could not be factorized after {tries} damping increases"
            )));
        }
        let values = self.face_values(state)?;
        let report = self.report(state, &values, &frozen);
        Ok(IterationReport {
            iteration,
            energy_start: e0,
            energy_end: e_end,
            accepted,
            tries,
            lambda: *lambda,
            step_norm,
            modes_changed,
            report,
        })
    }

    /// Runs the configured number of iterations. `on_iteration` sees every
    /// report and the new state; returning `false` stops the run.
    pub fn run(
        &self,
        state: &mut DesignState,
        mut on_iteration: impl FnMut(&IterationReport, &DesignState) -> bool,
    ) -> Result<Vec<IterationReport>> {
        let mut lambda = self.config.lambda;
        let mut out = Vec::new();
        for i in 0..self.config.iterations {
            let r = self.iterate(state, i, &mut lambda)?;
            let go = on_iteration(&r, state);
            out.push(r);
            if !go {
                break;
            }
        }
        Ok(out)
    }
}

/// Optimizes `state` in place for the configured number of iterations.
pub fn gauss_newton_iterate(
    state: &mut DesignState,
    model: &dyn Surrogate,
    reference: Option<&ReferenceSurface>,
    config: &OptimizeConfig,
) -> Result<Vec<IterationReport>> {
    let p = Problem::new(state, model, reference, config.clone())?;
    p.run(state, |_, _| true)
}
