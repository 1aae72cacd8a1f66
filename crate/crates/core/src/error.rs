use thiserror::Error;

/// Errors surfaced by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("series error: {0}")]
    Series(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("dimension limit exceeded: {0}")]
    DimensionLimit(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("numerical guard tripped: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
