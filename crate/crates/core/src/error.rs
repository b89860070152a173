use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the support or domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model or event lacks a capability the operation needs.
    #[error("unsupported: {0}")]
    Capability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    /// Conditional mass of a Gibbs slice is numerically zero.
    #[error("degenerate slice for coordinate {coordinate}: conditional mass {mass:e}")]
    DegenerateSlice { coordinate: usize, mass: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
