use thiserror::Error;

/// Errors surfaced by simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received parameters outside its contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested quantity is undefined for the given inputs.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough admissible data to produce the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
