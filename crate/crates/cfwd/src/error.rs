use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed mathematical input (non-monotone data, dimension mismatch, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A numerical routine failed (NaN state, overflow, exhausted rejection budget).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file could not be parsed or failed schema validation.
    #[error("invalid config: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
