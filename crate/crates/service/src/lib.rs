//! Design service: sessions that hold a facade design, predict its panels
//! with the surrogate, apply edits, run the optimizer in the background and
//! export results, exposed over JSON/HTTP with a server-sent event stream.

pub mod export;
pub mod http;
pub mod protocol;
pub mod registry;
pub mod session;

pub use http::{router, serve};
pub use registry::{Service, SessionHandle};
pub use session::{state_checksum, Model, RunStatus, Session};

use coldbend_core::geometry::MeshIssue;

/// Version of every JSON document the service reads or writes.
pub const SCHEMA_VERSION: u32 = 1;
/// Default display tessellation per panel and direction.
pub const DEFAULT_RESOLUTION: usize = 16;
/// Environment variable naming the default model file.
pub const MODEL_ENV: &str = "COLDBEND_MODEL";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Mesh(Vec<MeshIssue>),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error("unknown session {0}")]
    NotFound(u64),
    #[error("session busy: {0}")]
    Busy(String),
    #[error(transparent)]
    Core(#[from] coldbend_core::Error),
    #[error(transparent)]
    Design(#[from] coldbend_design::Error),
    #[error(transparent)]
    Surrogate(#[from] coldbend_surrogate::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
