use std::fmt;

use perstab_core::Error as CoreError;

/// Exit status for successful runs.
pub const EXIT_OK: u8 = 0;
/// Inconclusive analysis under `--strict`, or a numerical failure.
pub const EXIT_ANALYSIS: u8 = 1;
/// Bad command line, configuration, system file or history spec.
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Analysis(String),
    Output(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::Analysis(_) | Self::Output(_) => EXIT_ANALYSIS,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Analysis(m) => write!(f, "analysis error: {m}"),
            Self::Output(m) => write!(f, "output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidSystem(_)
            | CoreError::InvalidArgument(_)
            | CoreError::GridMismatch(_)
            | CoreError::NonConstant
            | CoreError::GrowthMargin { .. } => Self::Input(e.to_string()),
            _ => Self::Analysis(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
