use thiserror::Error;

/// Errors raised anywhere in the inference engine.
#[derive(Debug, Error)]
pub enum GibbsError {
    #[error("point {value} outside basis domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ill-conditioned system (condition number {0:.3e})")]
    Conditioning(f64),

    #[error("truncated prior is degenerate: no acceptance in {attempts} attempts")]
    DegenerateTruncation { attempts: usize },

    #[error("no finite-density initial point after {0} attempts")]
    Initialization(usize),

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = GibbsError> = std::result::Result<T, E>;

pub(crate) fn shape(msg: impl Into<String>) -> GibbsError {
    GibbsError::Shape(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> GibbsError {
    GibbsError::Precondition(msg.into())
}
