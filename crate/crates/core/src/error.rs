use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: `Verification` → 1,
/// `InvalidInput`/`Io`/`Parse` → 2, `Config` → 3.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A config file is malformed, or config and suite disagree.
    #[error("config error: {0}")]
    Config(String),

    /// A contract between modules was broken (e.g. missing bbox for a
    /// spatial ground-truth action).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values where finite arithmetic was required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A verification check failed.
    #[error("verification failed: {0}")]
    Verification(String),

    /// A structured text file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
