//! Façade-level inverse design: a quad base mesh whose faces are cold-bent
//! panels, optimized so predicted stresses stay below the glass limit while
//! the surface stays smooth and close to a reference.

pub mod face;
pub mod init;
pub mod optimize;
pub mod reference;
pub mod state;
pub mod surrogate;
pub mod terms;
pub mod topology;

pub use init::initialize_design;
pub use optimize::{gauss_newton_iterate, DesignReport, IterationReport, ModeCriterion, OptimizeConfig, Problem};
pub use reference::ReferenceSurface;
pub use state::{DesignState, Layout};
pub use surrogate::Surrogate;
pub use terms::{Breakdown, DesignWeights, Frozen, Row, Term, THETA_BOUND};
pub use topology::Topology;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] coldbend_core::Error),
    #[error(transparent)]
    Surrogate(#[from] coldbend_surrogate::Error),
    #[error(transparent)]
    Linalg(#[from] coldbend_core::linalg::LinalgError),
    #[error("invalid design input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
