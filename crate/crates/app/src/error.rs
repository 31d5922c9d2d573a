use std::path::Path;

use fast_core::FastError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numerical: {0}")]
    Numerical(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Numerical(_) => 4,
            AppError::Data(_) | AppError::NotFound(_) | AppError::Conflict(_) | AppError::Io { .. } => 3,
        }
    }

    /// HTTP status for the session service.
    pub fn status(&self) -> u16 {
        match self {
            AppError::NotFound(_) => 404,
            AppError::Conflict(_) => 409,
            AppError::Usage(_) | AppError::Data(_) | AppError::Numerical(_) => 422,
            AppError::Io { .. } => 500,
        }
    }
}

impl From<FastError> for AppError {
    fn from(e: FastError) -> Self {
        if e.is_numerical() {
            AppError::Numerical(e.to_string())
        } else if let FastError::UnknownSample(id) = &e {
            AppError::NotFound(format!("sample `{id}`"))
        } else {
            AppError::Data(e.to_string())
        }
    }
}
