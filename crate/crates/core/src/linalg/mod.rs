//! Sparse symmetric storage and an envelope Cholesky factorization.
//!
//! The shell Hessians and the Gauss-Newton normal equations are banded after a
//! reverse Cuthill-McKee reordering, so a skyline factorization is both simple
//! and fast enough for a few thousand unknowns.

mod envelope;
mod sym;

pub use envelope::{rcm_order, EnvelopeCholesky};
pub use sym::{SymSparse, Triplets};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}
