use thiserror::Error;

/// Errors raised by the workbench routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("polynomial degree {degree} exceeds the configured maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("unresolved eigenvalue {re:+.6e}{im:+.6e}i inside the half-plane")]
    Unresolved { re: f64, im: f64 },

    #[error("defective eigenvalue near {0}: {1}")]
    Defective(f64, String),

    #[error("ill-conditioned Gram matrix (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("non-finite state at tau = {tau} (node {index}), last good tau = {last_good}")]
    NonFinite { tau: f64, index: usize, last_good: f64 },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
