//! Error type shared by all solver modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by matrix kernels, model constructors and the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes do not line up; the message names the offending entity.
    Dimension(String),
    /// A matrix required to be positive definite failed its factorization.
    /// Carries the index of the pivot that fell below the threshold.
    NotPositiveDefinite { pivot_index: usize },
    /// A matrix required to be invertible is singular; `what` names it.
    Singular { what: String },
    /// A diagonal entry required to be strictly positive is not.
    NonPositiveDiagonal { index: usize },
    /// A mixing factor Q is required but absent.
    MissingMixing,
    /// A configuration value violates its documented range.
    InvalidConfig(String),
    /// The iteration lost numerical validity; carries the reason.
    Breakdown(String),
    /// Synthetic problem generation failed.
    Generation(String),
    /// An internal consistency check failed (signals numeric trouble,
    /// not bad input).
    Internal(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::Singular { what: what.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::NotPositiveDefinite { pivot_index } => {
                write!(f, "matrix is not positive definite (pivot {pivot_index})")
            }
            Error::Singular { what } => write!(f, "singular matrix: {what}"),
            Error::NonPositiveDiagonal { index } => {
                write!(f, "diagonal entry {index} is not strictly positive")
            }
            Error::MissingMixing => write!(f, "mixing factor Q is required but absent"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Breakdown(msg) => write!(f, "numerical breakdown: {msg}"),
            Error::Generation(msg) => write!(f, "generation error: {msg}"),
            Error::Internal(msg) => write!(f, "internal consistency error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
