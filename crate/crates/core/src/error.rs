use thiserror::Error;

/// Errors raised by the denoising library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied an argument that violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// An internal consistency check failed (e.g. broken conjugate symmetry).
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
