use thiserror::Error;

use crate::linalg::DensityDiagnostics;

/// Errors raised by the criterion engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("vector not normalized: {0}")]
    Normalization(String),

    #[error("mixture weights invalid: {0}")]
    Weight(String),

    #[error("format error at {context}: {message}")]
    Format { context: String, message: String },

    #[error("state failed validation: {0}")]
    StateValidation(DensityDiagnostics),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
