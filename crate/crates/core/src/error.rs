use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A scenario or configuration file is malformed or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative method exhausted its budget without reaching tolerance.
    #[error("non-convergence: {0}")]
    NonConvergence(String),

    /// A linear system could not be factorized or solved reliably.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
