//! Batch simulation of boundaries into symmetry-augmented records.

use crate::record::{Dataset, DatasetHeader, Provenance, Sample, Split};
use crate::sampling::{sample_boundary, SamplingRanges};
use crate::Result;
use coldbend_core::geometry::compact::CompactBoundary;
use coldbend_core::geometry::{symmetry_orbit, PanelBoundary};
use coldbend_core::panel::{simulate_panel, InitMode, PanelConfig, PanelRecord};
use coldbend_core::shell::MeshOptions;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub count: usize,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub panel: PanelConfig,
    pub validation_fraction: f64,
    pub split_seed: u64,
}

/// Boundary resolution used for dataset panels.
pub const DATASET_BOUNDARY_EDGES: usize = 48;

impl Default for GenerateConfig {
    fn default() -> Self {
        let panel = PanelConfig { mesh: MeshOptions::with_boundary_edges(DATASET_BOUNDARY_EDGES), ..PanelConfig::default() };
        Self { count: 5000, seed: 1, ranges: SamplingRanges::default(), panel, validation_fraction: 0.1, split_seed: 2 }
    }
}

/// The boundary drawn for job `index`; independent of every other job.
pub fn job_boundary(seed: u64, index: u64, ranges: &SamplingRanges) -> coldbend_core::Result<PanelBoundary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    sample_boundary(&mut rng, ranges).boundary()
}

/// The eight records of one simulated panel.
pub fn augment(record: &PanelRecord, source: u64, provenance: Provenance, parent: Option<u64>, split: Split) -> Result<Vec<Sample>> {
    let orbit = symmetry_orbit(&CompactBoundary { p: record.p }, &record.shape)?;
    Ok(orbit
        .into_iter()
        .enumerate()
        .map(|(k, (c, shape))| Sample {
            p: c.p,
            shape,
            sigma: record.sigma,
            sigma_true: record.sigma_true,
            fit_residual: record.fit_residual,
            provenance,
            source,
            orbit: k as u8,
            parent,
            split,
        })
        .collect())
}

/// Simulates every boundary from the zero-twist initialization, in parallel;
/// failures are logged and returned as `None`.
pub fn simulate_boundaries(boundaries: &[PanelBoundary], cfg: &PanelConfig) -> Vec<Option<PanelRecord>> {
    let done = AtomicUsize::new(0);
    boundaries
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let r = match simulate_panel(b, &InitMode::ZeroTwist, cfg) {
                Ok(sim) => Some(sim.record),
                Err(e) => {
                    log::warn!("panel {i} skipped: {e}");
                    None
                }
            };
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n % 100 == 0 {
                log::info!("simulated {n}/{}", boundaries.len());
            }
            r
        })
        .collect()
}

/// Splits whole panels (all eight records together) into train and
/// validation sets.
fn assign_splits(ids: &[u64], fraction: f64, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (fraction * ids.len() as f64).round() as usize;
    let mut split = vec![Split::Train; ids.len()];
    for &i in &order[..n_val.min(ids.len())] {
        split[i] = Split::Validation;
    }
    split
}

/// Dataset of zero-twist panels over the given boundaries; panel ids are the
/// boundary indices.
pub fn dataset_from_boundaries(boundaries: &[PanelBoundary], cfg: &GenerateConfig) -> Result<Dataset> {
    let records = simulate_boundaries(boundaries, &cfg.panel);
    let ok: Vec<(u64, PanelRecord)> =
        records.into_iter().enumerate().filter_map(|(i, r)| r.map(|r| (i as u64, r))).collect();
    let ids: Vec<u64> = ok.iter().map(|(i, _)| *i).collect();
    let splits = assign_splits(&ids, cfg.validation_fraction, cfg.split_seed);
    let mut samples = Vec::with_capacity(8 * ok.len());
    for ((id, r), split) in ok.iter().zip(splits) {
        samples.extend(augment(r, *id, Provenance::Default, None, split)?);
    }
    let mut header = DatasetHeader::new(cfg.panel, cfg.seed, cfg.split_seed, cfg.validation_fraction);
    header.counts.failed = boundaries.len() - ok.len();
    let mut ds = Dataset { header, samples };
    ds.recount();
    Ok(ds)
}

/// `cfg.count` random panels. Boundaries that fail to decode count as
/// failures like solver failures.
pub fn generate_dataset(cfg: &GenerateConfig) -> Result<Dataset> {
    let mut boundaries = Vec::with_capacity(cfg.count);
    let mut bad = 0;
    for i in 0..cfg.count as u64 {
        match job_boundary(cfg.seed, i, &cfg.ranges) {
            Ok(b) => boundaries.push(b),
            Err(e) => {
                log::warn!("boundary {i} skipped: {e}");
                bad += 1;
            }
        }
    }
    let mut ds = dataset_from_boundaries(&boundaries, cfg)?;
    ds.header.counts.failed += bad;
    Ok(ds)
}
