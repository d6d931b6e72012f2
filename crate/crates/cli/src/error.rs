use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid configuration key `{key}`: {reason}")]
    Validation { key: String, reason: String },
    #[error("unknown scenario `{0}` (see `list-scenarios`)")]
    UnknownScenario(String),
    #[error(transparent)]
    Core(#[from] oscctl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for bad input, 3 for a diverging simulation,
    /// 4 when the Lindblad cross-check fails, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::UnknownScenario(_) => {
                2
            }
            CliError::Core(e) => core_exit_code(e),
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }
}

pub fn core_exit_code(e: &oscctl_core::Error) -> i32 {
    use oscctl_core::Error as E;
    match e {
        E::Blowup { .. } => 3,
        E::OracleIntegrity { .. } | E::Truncation(_) | E::UnphysicalBath(_) | E::Infeasible(_) => 4,
        _ => 2,
    }
}
