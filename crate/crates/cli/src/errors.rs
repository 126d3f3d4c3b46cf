//! CLI error categories mapped onto process exit codes:
//! 2 config, 3 data/format, 4 internal invariant.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration: schema violations, invalid parameter ranges,
    /// unusable sweep specs.
    Config(String),
    /// Bad or missing data: unreadable corpora, malformed artifacts,
    /// misaligned evaluation inputs.
    Data(String),
    /// An internal invariant failed; a bug rather than bad input.
    Internal(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<knndiv_core::Error> for CliError {
    fn from(e: knndiv_core::Error) -> Self {
        match e {
            knndiv_core::Error::Internal(m) => CliError::Internal(m),
            knndiv_core::Error::Format { .. } => CliError::Data(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}
