use std::path::{Path, PathBuf};
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input file, configuration or flag.
    #[error("{0}")]
    Input(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// The model could not be fitted or the study could not run.
    #[error(transparent)]
    Estimation(setpar::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) | CliError::Io { .. } => ExitCode::from(2),
            CliError::Estimation(_) => ExitCode::from(3),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Core errors raised while checking user-supplied values.
pub fn invalid(context: &str) -> impl FnOnce(setpar::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{context}: {e}"))
}
