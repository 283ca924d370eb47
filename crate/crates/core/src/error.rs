use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("singular system in {context} (condition number ~ {condition:.3e})")]
    Singular { context: &'static str, condition: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("power iteration objective decreased by {drop:.3e} (relative) at step {step}")]
    MonotonicityViolation { step: usize, drop: f64 },

    #[error("non-finite loss for sample {sample}")]
    NonFiniteLoss { sample: usize },

    #[error("training diverged at step {step}: loss {loss:.4e} vs initial {initial:.4e}")]
    Diverged { step: usize, loss: f64, initial: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
