use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("scenario {scenario} failed: {message}")]
    ScenarioFailed { scenario: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("missing outputs: {0}")]
    MissingOutputs(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn scenario(scenario: &str, e: impl std::fmt::Display) -> Self {
        CliError::ScenarioFailed { scenario: scenario.to_string(), message: e.to_string() }
    }

    /// Process exit code of the error family.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::ScenarioFailed { .. } => 3,
            CliError::Io(_) => 4,
            CliError::MissingOutputs(_) => 5,
        }
    }
}
