use thiserror::Error;

/// Errors raised by the engine, the certifier and the experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A configured resource cap would be exceeded; nothing was computed.
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Every problem found while validating a configuration.
    #[error("invalid config: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::Argument(_) | Error::Config(_) | Error::Io(_) => 1,
            Error::ResourceCap(_) => 2,
            Error::Numeric(_) => 3,
        }
    }

    /// Short machine-readable class name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Argument(_) => "argument",
            Error::ResourceCap(_) => "resource_cap",
            Error::Numeric(_) => "numeric",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}
