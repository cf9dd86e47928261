//! Mixture density network mapping a compact panel boundary to a
//! two-component Gaussian mixture over interior shape and stress.

pub mod dense;
pub mod gmm;
pub mod metrics;
pub mod model;
pub mod net;
pub mod predict;
pub mod train;

pub use model::{GmmPrediction, InputJacobian, MdnModel, Mode, ModelMeta, Standardization, INPUTS};
pub use predict::{admissible, select, Criterion, Selection};
pub use train::{train, EpochStats, Samples, TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
