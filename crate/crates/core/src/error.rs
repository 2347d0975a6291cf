use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not unitary (|U^dag U - I|_F = {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("degenerate ensemble: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::DimensionMismatch { .. }
                | Error::NotUnitary(_)
                | Error::InvalidParameter(_)
                | Error::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
