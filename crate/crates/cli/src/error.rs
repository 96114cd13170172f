use std::fmt;

/// Failure of a CLI run, carrying the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Argument(_) => 2,
            CliError::Io(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn io(context: impl fmt::Display, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<mstsvd::Error> for CliError {
    fn from(e: mstsvd::Error) -> Self {
        match e {
            mstsvd::Error::Argument(m) => CliError::Argument(m),
            mstsvd::Error::Invariant(m) => CliError::Invariant(m),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
