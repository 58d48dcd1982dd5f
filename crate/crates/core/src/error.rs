use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps [`Error::SizeGuard`] to exit code 3 and everything else to 2.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
