use thiserror::Error;

/// Errors raised by the simulator and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid user pair: k = i = {0}")]
    InvalidPair(usize),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable class used by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::Domain(_) => "domain",
            Error::InvalidConfig(_) => "invalid-config",
            Error::ConfigParse { .. } => "config-parse",
            Error::DegenerateChannel(_) => "degenerate-channel",
            Error::DegenerateScenario(_) => "degenerate-scenario",
            Error::InvalidCovariance(_) => "invalid-covariance",
            Error::InvalidPair(_) => "invalid-pair",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
