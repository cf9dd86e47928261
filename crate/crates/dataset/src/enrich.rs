//! Multistability enrichment: re-simulate training panels from the surrogate's
//! predicted shapes where those deviate most from the stored equilibrium, and
//! keep the results that land on a different equilibrium.

use crate::generate::augment;
use crate::record::{Dataset, Provenance, Sample, Split};
use crate::Result;
use coldbend_core::geometry::compact::{decode_panel, CompactBoundary, Shape};
use coldbend_core::panel::{shape_distance, simulate_panel, InitMode, PanelConfig};
use coldbend_surrogate::{GmmPrediction, MdnModel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Anything that predicts mixtures for a batch of boundaries.
pub trait ShapePredictor: Sync {
    fn predict(&self, p: &[[f64; 18]]) -> Result<Vec<GmmPrediction>>;
}

impl ShapePredictor for MdnModel {
    fn predict(&self, p: &[[f64; 18]]) -> Result<Vec<GmmPrediction>> {
        Ok(self.forward_batch(p)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichConfig {
    /// Fraction of the training panels that is re-simulated.
    pub fraction: f64,
    /// Modes below this mixture weight are ignored.
    pub min_probability: f64,
    /// Minimal interior-control difference for a new equilibrium (mm).
    pub novelty: f64,
    pub panel: PanelConfig,
}

impl EnrichConfig {
    pub fn new(panel: PanelConfig) -> Self {
        Self { fraction: 0.15, min_probability: 0.05, novelty: 2.0, panel }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrichReport {
    /// Training panels considered.
    pub panels: usize,
    /// Predicted modes whose deviation reached the novelty threshold.
    pub candidates: usize,
    pub resimulated: usize,
    pub failed: usize,
    /// New panels, each contributing eight records.
    pub accepted: usize,
}

struct Candidate {
    source: u64,
    p: [f64; 18],
    stored: Shape,
    init: Shape,
    deviation: f64,
}

/// Runs one enrichment pass and returns the new records, ready to append.
pub fn enrich_dataset(model: &dyn ShapePredictor, ds: &Dataset, cfg: &EnrichConfig) -> Result<(Vec<Sample>, EnrichReport)> {
    let panels: Vec<&Sample> = ds.panels().filter(|s| s.split == Split::Train).collect();
    let inputs: Vec<[f64; 18]> = panels.iter().map(|s| s.p).collect();
    let preds = if inputs.is_empty() { Vec::new() } else { model.predict(&inputs)? };
    let mut report = EnrichReport { panels: panels.len(), ..Default::default() };

    // most deviating admissible mode of every panel
    let mut cands: Vec<Candidate> = Vec::new();
    for (s, pred) in panels.iter().zip(&preds) {
        let best = pred
            .modes
            .iter()
            .filter(|m| m.pi > cfg.min_probability)
            .map(|m| (shape_distance(&m.shape, &s.shape), m.shape))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((deviation, init)) = best {
            if deviation >= cfg.novelty {
                cands.push(Candidate { source: s.source, p: s.p, stored: s.shape, init, deviation });
            }
        }
    }
    report.candidates = cands.len();
    cands.sort_by(|a, b| b.deviation.total_cmp(&a.deviation).then(a.source.cmp(&b.source)));
    let take = ((cfg.fraction * panels.len() as f64).ceil() as usize).min(cands.len());
    cands.truncate(take);
    report.resimulated = cands.len();

    let results: Vec<Option<_>> = cands
        .par_iter()
        .map(|c| {
            let run = || -> std::result::Result<_, Box<dyn std::error::Error + Send + Sync>> {
                let (boundary, patch) = decode_panel(&CompactBoundary { p: c.p }, &c.init)?;
                Ok(simulate_panel(&boundary, &InitMode::Patch(patch), &cfg.panel)?.record)
            };
            match run() {
                Ok(r) => Some(r),
                Err(e) => {
                    log::warn!("enrichment of panel {} skipped: {e}", c.source);
                    None
                }
            }
        })
        .collect();

    let mut next = ds.next_panel_id();
    let mut out = Vec::new();
    for (c, r) in cands.iter().zip(results) {
        let Some(r) = r else {
            report.failed += 1;
            continue;
        };
        if shape_distance(&r.shape, &c.stored) < cfg.novelty {
            continue;
        }
        out.extend(augment(&r, next, Provenance::Enriched, Some(c.source), Split::Train)?);
        next += 1;
        report.accepted += 1;
    }
    Ok((out, report))
}

impl Dataset {
    pub fn append_enriched(&mut self, samples: Vec<Sample>) {
        self.samples.extend(samples);
        self.recount();
    }
}
