use curriculum_lab::LabError;
use thiserror::Error;

/// Exit status for a run that completed with every check passing.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a failed verification or a failed construction.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for invalid arguments, configuration or preconditions.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

impl From<LabError> for CliError {
    /// Violated preconditions are usage errors; everything else is a failure
    /// of the run itself.
    fn from(e: LabError) -> Self {
        match e {
            LabError::Dimension { .. }
            | LabError::InvalidParameter(_)
            | LabError::ContractViolation(_)
            | LabError::PoleDegeneracy { .. }
            | LabError::FrameDegeneracy { .. }
            | LabError::UnsupportedConditioning(_)
            | LabError::NonNormalizable(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failure(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Failure(format!("json: {e}"))
    }
}
