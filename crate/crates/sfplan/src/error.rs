use std::path::PathBuf;

use crate::layout::LayoutError;
use crate::task::FsaParseError;

/// Errors of the front end, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Layout { path: String, source: LayoutError },
    #[error("{path}: {source}")]
    Task { path: String, source: FsaParseError },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] sfplan_core::Error),
}

impl AppError {
    /// 3 for numerical failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(sfplan_core::Error::Numerical(_)) | AppError::Core(sfplan_core::Error::CapExceeded(_)) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Format(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        AppError::Format(e.to_string())
    }
}

pub type AppResult<T> = Result<T, AppError>;
