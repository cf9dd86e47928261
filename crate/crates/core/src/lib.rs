//! Core numerics for cold-bent glass panels: Bézier boundary geometry and its
//! rigid-invariant encoding, a discrete thin-shell simulator that finds
//! minimal-energy panels, and the sparse linear algebra both rely on.

pub mod ad;
pub mod geometry;
pub mod linalg;
pub mod panel;
pub mod shell;

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Self::Invalid(msg.to_string())
    }
    pub fn numerical(msg: impl fmt::Display) -> Self {
        Self::Numerical(msg.to_string())
    }
    pub fn format(msg: impl fmt::Display) -> Self {
        Self::Format(msg.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Self::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Millimetre-space 3-vector used throughout.
pub type P3 = nalgebra::Vector3<f64>;
