use std::path::PathBuf;

use balance_core::analysis::AnalysisError;
use balance_core::stability::StabilityError;
use balance_core::trial::TrialError;
use balance_core::SddeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 0 success, 2 validation, 3 divergence, 4 I/O; anything else is 1.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Failed(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, e: impl ToString) -> Self {
        CliError::Io { path: path.into(), message: e.to_string() }
    }
}

impl From<SddeError> for CliError {
    fn from(e: SddeError) -> Self {
        match e {
            SddeError::InvalidParams(_) => CliError::Validation(e.to_string()),
            SddeError::NonFinite(_) | SddeError::Diverged { .. } => CliError::Divergence(e.to_string()),
        }
    }
}

impl From<StabilityError> for CliError {
    fn from(e: StabilityError) -> Self {
        match e {
            StabilityError::Model(m) => m.into(),
            StabilityError::Diverged { .. } => CliError::Divergence(e.to_string()),
            StabilityError::InvalidInput(_)
            | StabilityError::HorizonTooShort { .. }
            | StabilityError::Unsupported(_)
            | StabilityError::NoStraddle { .. } => CliError::Validation(e.to_string()),
            StabilityError::NoRootFound | StabilityError::NotConverged { .. } => CliError::Failed(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Model(m) => m.into(),
            AnalysisError::NoPeaks => CliError::Failed(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TrialError> for CliError {
    fn from(e: TrialError) -> Self {
        match e {
            TrialError::Io { path, source } => CliError::io(path, source),
            other => CliError::Validation(other.to_string()),
        }
    }
}
