use thiserror::Error;

/// Errors raised by the tomography algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("purification length {0} is not a perfect square")]
    NonSquareLength(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is not one (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("outcome arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("measurement data are informationally incomplete: design rank {rank} of {params} parameters (deficiency {deficiency})")]
    InformationallyIncomplete {
        rank: usize,
        params: usize,
        deficiency: usize,
    },

    #[error("degenerate posterior: every particle assigns zero probability to the observed data")]
    DegeneratePosterior,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("measurement source failed: {0}")]
    Source(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
