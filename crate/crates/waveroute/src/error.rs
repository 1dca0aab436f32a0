//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of range or malformed.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Geometry that cannot be constructed (coincident endpoints, undefined
    /// bow direction, ...).
    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    /// A circuit violates a structural invariant (cycle, unreachable output,
    /// missing reference, ...).
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    /// A generator produced geometry that fails its own manufacturability
    /// check.
    #[error("generation failed: {0}")]
    Generation(String),

    /// An exact integer result does not fit the return type.
    #[error("overflow: {0}")]
    Overflow(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
