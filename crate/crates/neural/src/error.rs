use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("invalid graph state: {0}")]
    State(String),

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> NeuralError {
    NeuralError::Dimension {
        op,
        detail: detail.into(),
    }
}
