//! Training data for the surrogate: random panel boundaries, batch
//! simulation with eightfold symmetry augmentation, storage, and the
//! enrichment pass that adds second equilibria of multistable panels.

pub mod enrich;
pub mod family;
pub mod generate;
pub mod record;
pub mod sampling;
pub mod stats;

pub use enrich::{enrich_dataset, EnrichConfig, EnrichReport, ShapePredictor};
pub use family::{family_dataset, saddle_family, simulate_family, FamilyMember, SaddleParams, SaddleRanges};
pub use generate::{dataset_from_boundaries, generate_dataset, GenerateConfig};
pub use record::{Dataset, DatasetHeader, Provenance, Sample, Split};
pub use sampling::{sample_boundary, BoundaryDraw, SamplingRanges};
pub use stats::{dataset_stats, DatasetStats};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] coldbend_core::Error),
    #[error(transparent)]
    Surrogate(#[from] coldbend_surrogate::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Self::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
