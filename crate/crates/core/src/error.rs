use thiserror::Error;

/// Errors produced by the operator builders, factorizations, solver and models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// `N(J) ∩ N(L) ≠ {0}` (numerically): the damped system is not positive definite.
    #[error("completeness condition violated: {0}")]
    Completeness(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
