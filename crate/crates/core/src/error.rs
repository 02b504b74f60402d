use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inconsistent sizes, capacities or parameters.
    #[error("usage error: {0}")]
    Usage(String),
    /// The channel matrix is numerically rank deficient.
    #[error("singular channel: {0}")]
    SingularChannel(String),
    /// Invalid or malformed experiment configuration.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
