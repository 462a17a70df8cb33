//! Error types shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range (bad `(n, k)`, zero budget, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The field cannot be integrated by the requested transform
    /// (e.g. power-law decay without finite support).
    #[error("unsupported field: {0}")]
    UnsupportedField(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),

    /// Log-log decay fit over data that is identically zero or non-positive.
    #[error("undefined slope: {0}")]
    UndefinedSlope(String),

    #[error("underdetermined fit: need {needed} samples, have {got}")]
    UnderdeterminedFit { needed: usize, got: usize },

    /// The admissible family is empty after the domination filter.
    #[error("no admissible estimate: {0}")]
    NoEstimate(String),

    /// A witness fails the non-negativity or regularity requirements of the
    /// admissible class.
    #[error("witness rejected: {0}")]
    WitnessRejected(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
