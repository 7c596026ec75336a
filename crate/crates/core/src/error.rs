use thiserror::Error;

pub type Result<T> = std::result::Result<T, UqError>;

#[derive(Debug, Error)]
pub enum UqError {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("per-sample noise variance unavailable (requires at least 2 histories per sample)")]
    NoiseVarianceUnavailable,

    #[error("surrogate carries no {0} covariance")]
    MissingCovariance(&'static str),

    #[error("sensitivity indices undefined: total variance is zero")]
    UndefinedSobol,

    #[error("degenerate signal: Var[Q Psi_k] is zero")]
    DegenerateSignal,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl UqError {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        UqError::Precondition(msg.into())
    }
}
