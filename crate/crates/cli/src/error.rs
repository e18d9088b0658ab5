use std::fmt;

use isoflow::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Malformed config, bad arguments or unwritable output.
    Config = 2,
    /// The model or request violates a precondition of the analysis.
    Precondition = 3,
    /// A numeric procedure failed to reach a decision.
    Numeric = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Config,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Precondition,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidModel(_) | Error::InvalidInput(_) => ExitKind::Config,
            Error::InvalidSpec(_) | Error::DegenerateModel(_) | Error::StepRejected { .. } => ExitKind::Precondition,
            Error::Numerics(_) | Error::Inconclusive(_) | Error::Consistency(_) => ExitKind::Numeric,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(format!("json error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::config(format!("csv error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
