//! Random panel boundaries in compact form.
//!
//! Two adjacent edge lengths `l1, l2`, the angle `α` between them and a
//! displacement `a` of the fourth corner from the parallelogram point define
//! the corners; edge-plane inclinations and tangent angles are drawn
//! independently.

use coldbend_core::geometry::compact::DIST_PAIRS;
use coldbend_core::geometry::{compact_decode, CompactBoundary, PanelBoundary};
use coldbend_core::P3;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

/// Ranges of the boundary distribution (mm, radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub length: [f64; 2],
    pub alpha: [f64; 2],
    /// Displacement magnitude as a fraction of `min(l1, l2)`.
    pub displacement_fraction: f64,
    pub gamma_max: f64,
    pub theta_max: f64,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            length: [150.0, 600.0],
            alpha: [60f64.to_radians(), 120f64.to_radians()],
            displacement_fraction: 0.25,
            gamma_max: 90f64.to_radians(),
            theta_max: 5f64.to_radians(),
        }
    }
}

/// The raw draws behind one boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDraw {
    pub l1: f64,
    pub l2: f64,
    pub alpha: f64,
    pub a: [f64; 3],
    pub gamma: [f64; 4],
    pub theta: [f64; 8],
}

impl BoundaryDraw {
    /// Corners `c00, c30, c33, c03` before canonical posing.
    pub fn corners(&self) -> [P3; 4] {
        let c00 = P3::zeros();
        let c30 = P3::new(self.l1, 0.0, 0.0);
        let c03 = P3::new(self.l2 * self.alpha.cos(), self.l2 * self.alpha.sin(), 0.0);
        let c33 = c30 + c03 + P3::from(self.a);
        [c00, c30, c33, c03]
    }

    pub fn compact(&self) -> CompactBoundary {
        let c = self.corners();
        let mut p = [0.0; 18];
        for (k, &(i, j)) in DIST_PAIRS.iter().enumerate() {
            p[k] = (c[i] - c[j]).norm_squared();
        }
        p[6..10].copy_from_slice(&self.gamma);
        p[10..18].copy_from_slice(&self.theta);
        CompactBoundary { p }
    }

    /// The boundary in its canonical pose.
    pub fn boundary(&self) -> coldbend_core::Result<PanelBoundary> {
        compact_decode(&self.compact())
    }
}

pub fn sample_boundary<R: Rng + ?Sized>(rng: &mut R, r: &SamplingRanges) -> BoundaryDraw {
    let l1 = rng.random_range(r.length[0]..=r.length[1]);
    let l2 = rng.random_range(r.length[0]..=r.length[1]);
    let alpha = rng.random_range(r.alpha[0]..=r.alpha[1]);
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let mag = rng.random_range(0.0..=r.displacement_fraction * l1.min(l2));
    let a = dir.map(|x| x * mag);
    let gamma = std::array::from_fn(|_| rng.random_range(-r.gamma_max..=r.gamma_max));
    let cmin = r.theta_max.cos();
    let theta = std::array::from_fn(|_| {
        let t = rng.random_range(cmin..=1.0f64).min(1.0).acos();
        if rng.random_bool(0.5) {
            -t
        } else {
            t
        }
    });
    BoundaryDraw { l1, l2, alpha, a, gamma, theta }
}
