use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("empty table: total mass is zero")]
    EmptyTable,

    #[error("redundancy undefined for `{0}`: maximum entropy is zero")]
    UndefinedRedundancy(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Io,
    Degenerate,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Schema(_)
            | Error::Validation(_)
            | Error::UnknownDimension(_)
            | Error::InvalidSubset(_)
            | Error::Json(_) => ErrorCategory::Validation,
            Error::Io { .. } => ErrorCategory::Io,
            Error::Csv(e) if e.is_io_error() => ErrorCategory::Io,
            Error::Csv(_) => ErrorCategory::Validation,
            Error::EmptyTable | Error::UndefinedRedundancy(_) | Error::Degenerate(_) => {
                ErrorCategory::Degenerate
            }
        }
    }
}
