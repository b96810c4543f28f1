use thiserror::Error;

/// Errors raised by scheme construction, error analysis, simulation and pricing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("matrix is not positive semidefinite: pivot {pivot:e} at index {index} (threshold {threshold:e})")]
    NotPsd {
        pivot: f64,
        index: usize,
        threshold: f64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_invalid_argument(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
