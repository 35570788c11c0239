use thiserror::Error;

/// Errors raised by the expansion library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two inputs disagree on a shared dimension.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The request is valid but not implemented for these inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A size limit was hit before the target was reached.
    #[error("capacity exceeded: {message} (achieved {achieved:e} at p = {p})")]
    Capacity { message: String, p: usize, achieved: f64 },
    /// Malformed serialized input.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
