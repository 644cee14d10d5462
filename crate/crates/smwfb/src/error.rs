//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by signal generation, the lattice, and the evaluation tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unstable filter: root magnitude {0} >= 1")]
    UnstableFilter(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite sample at index {0}")]
    NonFiniteInput(usize),

    #[error("wrong sample count: expected {expected}, got {got}")]
    WrongSampleCount { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
