use std::path::PathBuf;

use langtrack_numeric::NumericError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("merge error: {0}")]
    Merge(String),
    #[error("state error: {0}")]
    State(String),
    #[error("lookup error: no embedding for description {0:?}")]
    Lookup(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short category name, used by the CLI when reporting failures.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Config(_) => "config",
            Error::Merge(_) => "merge",
            Error::State(_) => "state",
            Error::Lookup(_) => "lookup",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Internal(_) => "internal",
            Error::Numeric(_) => "numeric",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
