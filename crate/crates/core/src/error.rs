use thiserror::Error;

/// Errors raised by the distribution, derivation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation needs a proper (normalizable) prior.
    #[error("improper prior: {0} has no normalized {1}")]
    ImproperPrior(&'static str, &'static str),

    /// A moment that does not exist for the given parameters was requested.
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    /// The posterior would not be integrable.
    #[error("improper posterior: {0}")]
    ImproperPosterior(String),

    /// Input data could not be used (parsing, missing columns, bad cells).
    #[error("input error: {0}")]
    Input(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for errors caused by the user's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Input(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
