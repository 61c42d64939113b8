use thiserror::Error;

/// Error kinds shared by every module. The CLI maps them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad parameters supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input outside the domain of an operation (point outside a window, empty set, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The input has a structure the solver cannot handle (singular system, isolated vertex).
    #[error("structural error: {0}")]
    Structural(String),
    /// Exact computation refused because the instance exceeds the configured size cap.
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
