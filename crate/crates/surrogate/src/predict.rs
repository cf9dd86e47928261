//! Which predicted modes count as admissible panels, and which one to use.

use crate::model::{GmmPrediction, Mode};

/// Components below this probability are discarded.
pub const MIN_MODE_PROBABILITY: f64 = 0.05;
/// A component above this probability is the only output.
pub const SOLE_MODE_PROBABILITY: f64 = 0.95;

pub enum Criterion<'a> {
    MinStress,
    /// Smallest coordinate-wise distance to a reference interior shape.
    ClosestTo(&'a [f64; 12]),
    /// Smallest score, e.g. a smoothness measure supplied by the caller.
    Score(&'a dyn Fn(&Mode) -> f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Admissible modes with their component index, most probable first.
    pub modes: Vec<(usize, Mode)>,
    /// Index into `modes`.
    pub best: usize,
}

impl Selection {
    pub fn best_mode(&self) -> &Mode {
        &self.modes[self.best].1
    }

    pub fn best_component(&self) -> usize {
        self.modes[self.best].0
    }
}

/// Component indices kept by the probability rules, most probable first.
pub fn admissible(pred: &GmmPrediction) -> Vec<usize> {
    let pi = pred.pi();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&a, &b| pi[b].total_cmp(&pi[a]));
    if pi[order[0]] > SOLE_MODE_PROBABILITY {
        return vec![order[0]];
    }
    let kept: Vec<usize> = order.into_iter().filter(|&k| pi[k] >= MIN_MODE_PROBABILITY).collect();
    assert!(!kept.is_empty(), "mixture weights sum to one, so one component has at least 5%");
    kept
}

fn score(m: &Mode, c: &Criterion<'_>) -> f64 {
    match c {
        Criterion::MinStress => m.sigma,
        Criterion::ClosestTo(r) => m.shape.iter().zip(r.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        Criterion::Score(f) => f(m),
    }
}

pub fn select(pred: &GmmPrediction, criterion: &Criterion<'_>) -> Selection {
    let modes: Vec<(usize, Mode)> = admissible(pred).into_iter().map(|k| (k, pred.modes[k].clone())).collect();
    let best = (0..modes.len()).min_by(|&a, &b| score(&modes[a].1, criterion).total_cmp(&score(&modes[b].1, criterion))).unwrap_or(0);
    Selection { modes, best }
}
