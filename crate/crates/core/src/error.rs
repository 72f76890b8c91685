use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data or parameters that violate a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A malformed line in an ingested file (1-based line number).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A linear-algebra step failed (singular system, broken Gram matrix, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by the data or arguments rather than numerics.
    pub fn is_input(&self) -> bool {
        matches!(self, Error::Input(_) | Error::Parse { .. } | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
