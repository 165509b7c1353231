use std::fmt;

use crate::config::ConfigError;

/// Exit code 1 for usage problems, 2 for failures inside a stage.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Pipeline(String),
}

impl CliError {
    pub fn pipeline(msg: impl Into<String>) -> Self {
        CliError::Pipeline(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Pipeline(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Pipeline(m) => f.write_str(m),
        }
    }
}

impl From<stackplay::error::Error> for CliError {
    fn from(e: stackplay::error::Error) -> Self {
        CliError::Pipeline(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}
