//! Summary statistics of a dataset.

use crate::record::{Dataset, Provenance};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Width of the σ histogram bins (MPa).
pub const SIGMA_BIN: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub panels: usize,
    pub records: usize,
    pub train: usize,
    pub validation: usize,
    pub failed: usize,
    pub enriched_panels: usize,
    /// Default panels for which enrichment found a second equilibrium.
    pub multistable_fraction: f64,
    /// Per-component `[min, max]` of `p` over all records.
    pub p_range: Vec<[f64; 2]>,
    /// `(lower edge, count)` of the σ histogram over simulated panels.
    pub sigma_histogram: Vec<(f64, usize)>,
    pub sigma_mean: f64,
    pub sigma_max: f64,
    pub max_fit_residual: f64,
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let c = ds.header.counts;
    let mut p_range = vec![[f64::INFINITY, f64::NEG_INFINITY]; 18];
    for s in &ds.samples {
        for (r, &x) in p_range.iter_mut().zip(&s.p) {
            r[0] = r[0].min(x);
            r[1] = r[1].max(x);
        }
    }
    let sigmas: Vec<f64> = ds.panels().map(|s| s.sigma).collect();
    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let bins = (sigma_max / SIGMA_BIN).floor() as usize + 1;
    let mut hist = vec![0usize; if sigmas.is_empty() { 0 } else { bins }];
    for &s in &sigmas {
        hist[((s / SIGMA_BIN).floor().max(0.0) as usize).min(bins - 1)] += 1;
    }
    let default_panels = ds.panels().filter(|s| s.provenance == Provenance::Default).count();
    let mut parents: Vec<u64> = ds.panels().filter_map(|s| s.parent).collect();
    parents.sort_unstable();
    parents.dedup();
    DatasetStats {
        panels: c.panels,
        records: c.records,
        train: c.train,
        validation: c.validation,
        failed: c.failed,
        enriched_panels: c.enriched_panels,
        multistable_fraction: if default_panels == 0 { 0.0 } else { parents.len() as f64 / default_panels as f64 },
        p_range,
        sigma_histogram: hist.into_iter().enumerate().map(|(i, n)| (i as f64 * SIGMA_BIN, n)).collect(),
        sigma_mean: if sigmas.is_empty() { f64::NAN } else { sigmas.iter().sum::<f64>() / sigmas.len() as f64 },
        sigma_max,
        max_fit_residual: ds.samples.iter().map(|s| s.fit_residual).fold(0.0, f64::max),
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "panels {} ({} failed), records {} (train {}, validation {})", self.panels, self.failed, self.records, self.train, self.validation)?;
        writeln!(f, "enriched panels {}, multistable fraction {:.3}", self.enriched_panels, self.multistable_fraction)?;
        writeln!(f, "sigma mean {:.2} MPa, max {:.2} MPa, max fit residual {:.3} mm", self.sigma_mean, self.sigma_max, self.max_fit_residual)?;
        let names = ["d03", "d01", "d02", "d31", "d32", "d12"];
        for (i, r) in self.p_range.iter().enumerate() {
            let name = match i {
                0..=5 => names[i].to_string(),
                6..=9 => format!("gamma{}", i - 6),
                _ => format!("theta{}", i - 10),
            };
            writeln!(f, "  {name:>7}: [{:.4e}, {:.4e}]", r[0], r[1])?;
        }
        writeln!(f, "sigma histogram (MPa):")?;
        let peak = self.sigma_histogram.iter().map(|h| h.1).max().unwrap_or(1).max(1);
        for (lo, n) in &self.sigma_histogram {
            let bar = "#".repeat((40 * n).div_ceil(peak));
            writeln!(f, "  {:>5.0}-{:<5.0} {:>6} {bar}", lo, lo + SIGMA_BIN, n)?;
        }
        Ok(())
    }
}
