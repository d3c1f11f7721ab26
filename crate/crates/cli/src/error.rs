use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running the simulation or writing outputs.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    /// The message without the kind prefix.
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<hybridsim::Error> for CliError {
    fn from(e: hybridsim::Error) -> Self {
        match e {
            hybridsim::Error::Configuration(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
