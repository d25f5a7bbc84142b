use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical non-convergence: {0}")]
    NotConverged(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 config or I/O error, 2 non-convergence, 3 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::NotConverged(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<hydrofriction::Error> for CliError {
    fn from(e: hydrofriction::Error) -> Self {
        use hydrofriction::Error as E;
        match e {
            E::NotConverged { .. } | E::NegativeRadicand { .. } => CliError::NotConverged(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
