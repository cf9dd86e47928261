//! Twisted rectangles: planar-edged boundaries whose fourth corner is lifted
//! out of plane, the classic setting with two stable bending modes.

use crate::generate::augment;
use crate::record::{Dataset, DatasetHeader, Provenance, Split};
use crate::Result;
use coldbend_core::geometry::PanelBoundary;
use coldbend_core::panel::{mirrored_init, shape_distance, simulate_panel, InitMode, PanelConfig, PanelRecord};
use coldbend_core::P3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleParams {
    pub width: f64,
    pub height: f64,
    /// Out-of-plane offset between the two diagonals' corner pairs (mm).
    pub twist: f64,
}

impl SaddleParams {
    /// Straight edges; corners alternate at `±twist/2`.
    pub fn boundary(&self) -> coldbend_core::Result<PanelBoundary> {
        let (w, h, t) = (self.width / 2.0, self.height / 2.0, self.twist / 2.0);
        PanelBoundary::straight([P3::new(-w, -h, t), P3::new(w, -h, -t), P3::new(w, h, t), P3::new(-w, h, -t)])
    }
}

/// Ranges swept by [`saddle_family`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleRanges {
    pub width: [f64; 2],
    pub aspect: [f64; 2],
    pub twist: [f64; 2],
}

impl Default for SaddleRanges {
    fn default() -> Self {
        Self { width: [350.0, 500.0], aspect: [0.8, 1.0], twist: [15.0, 30.0] }
    }
}

/// `count` members on a deterministic low-discrepancy sweep of the ranges.
pub fn saddle_family(count: usize, r: &SaddleRanges) -> Vec<SaddleParams> {
    // additive recurrence with the plastic-number generalization of φ
    let g = 1.220_744_084_605_759_5f64;
    let a = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (0..count)
        .map(|i| {
            let u: [f64; 3] = std::array::from_fn(|k| (0.5 + a[k] * i as f64).fract());
            let lerp = |r: [f64; 2], t: f64| r[0] + (r[1] - r[0]) * t;
            let width = lerp(r.width, u[0]);
            SaddleParams { width, height: width * lerp(r.aspect, u[1]), twist: lerp(r.twist, u[2]) }
        })
        .collect()
}

/// Both equilibria of one family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub params: SaddleParams,
    /// From the zero-twist initialization.
    pub first: PanelRecord,
    /// From the mirror of the first equilibrium.
    pub second: PanelRecord,
    /// Largest interior-control distance between the two (mm).
    pub separation: f64,
}

/// Simulates every member from the zero-twist start and from the mirrored
/// fit of that equilibrium; members whose solves fail are `None`.
pub fn simulate_family(members: &[SaddleParams], cfg: &PanelConfig) -> Vec<Option<FamilyMember>> {
    members
        .par_iter()
        .map(|&params| {
            let run = || -> std::result::Result<FamilyMember, Box<dyn std::error::Error + Send + Sync>> {
                let b = params.boundary()?;
                let a = simulate_panel(&b, &InitMode::ZeroTwist, cfg)?;
                let init = mirrored_init(&b, &a.fit.patch)?;
                let c = simulate_panel(&b, &InitMode::Patch(init), cfg)?;
                let separation = shape_distance(&a.record.shape, &c.record.shape);
                Ok(FamilyMember { params, first: a.record, second: c.record, separation })
            };
            run().map_err(|e| log::warn!("saddle {params:?} skipped: {e}")).ok()
        })
        .collect()
}

/// Training records of both equilibria of every member that has two
/// (separation at least `novelty`); all records go to the training split.
pub fn family_dataset(members: &[FamilyMember], novelty: f64, header: DatasetHeader) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut id = 0;
    for m in members.iter().filter(|m| m.separation >= novelty) {
        samples.extend(augment(&m.first, id, Provenance::Default, None, Split::Train)?);
        samples.extend(augment(&m.second, id + 1, Provenance::Mirrored, Some(id), Split::Train)?);
        id += 2;
    }
    let mut ds = Dataset { header, samples };
    ds.recount();
    Ok(ds)
}
