use thiserror::Error;

use crate::sparse::mtx::MatrixMarketError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    MatrixMarket(#[from] MatrixMarketError),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("sparsity pattern {found:#018x} does not match the symbolic factorization ({expected:#018x})")]
    PatternMismatch { expected: u64, found: u64 },

    /// A pivot of magnitude at most the breakdown threshold was met: the shift
    /// numerically coincides with an eigenvalue of the pencil.
    #[error("exact singularity at pivot {pivot} (|d| = {magnitude:e}, threshold {threshold:e})")]
    ExactSingularity {
        pivot: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("factorization has {zero} zero pivots and cannot be used for solves")]
    SingularFactor { zero: usize },

    #[error("matrix B is not positive definite ({negative} negative, {zero} zero pivots)")]
    NotPositiveDefinite { negative: usize, zero: usize },

    #[error("Lanczos breakdown at step {step}: invariant subspace found")]
    Breakdown { step: usize },

    #[error("{stage}: no result after {iterations} iterations ({reason})")]
    MaxIterations {
        stage: &'static str,
        iterations: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
