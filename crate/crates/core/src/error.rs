use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller input: arguments, configuration, malformed records.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: record {record}: {detail}")]
    Record {
        path: PathBuf,
        record: usize,
        detail: String,
    },

    #[error("{path}:{line}: {detail}")]
    Line {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Neural(#[from] oppmodel_neural::NeuralError),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation-type failures are the caller's fault; numeric and
    /// runtime failures are not.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Argument(_)
            | Error::Input(_)
            | Error::Validation(_)
            | Error::Record { .. }
            | Error::Line { .. }
            | Error::Io { .. }
            | Error::Json(_) => true,
            Error::Numeric(_) => false,
            Error::Neural(e) => matches!(
                e,
                oppmodel_neural::NeuralError::Argument(_)
                    | oppmodel_neural::NeuralError::Format(_)
                    | oppmodel_neural::NeuralError::Json(_)
                    | oppmodel_neural::NeuralError::Io(_)
            ),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
