use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum KanAftError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported spline degree {0} (derivatives need degree >= 1)")]
    UnsupportedDegree(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("censoring survival estimate reaches zero at {at} before time {time}")]
    UnsupportedTail { at: f64, time: f64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("numeric guard: {0}")]
    NumericGuard(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unsupported network shape: {0}")]
    UnsupportedShape(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, KanAftError>;

impl KanAftError {
    /// Process exit code for this error: 2 for usage/config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            KanAftError::Config(_) | KanAftError::Schema(_) => 2,
            _ => 1,
        }
    }
}
