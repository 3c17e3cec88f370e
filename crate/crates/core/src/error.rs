use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid token: {0}")]
    InvalidToken(String),

    #[error("parse error at token {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("numeric configuration violates a construction constraint: {0}")]
    NumericConstraint(String),

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("construction too large: {0}")]
    TooLarge(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("`$` ends a run; no state is defined after it")]
    StepAfterEnd,

    #[error("could not decode stack from network state: {0}")]
    Decode(String),

    #[error("enumeration budget exceeded: {0}")]
    Budget(String),

    #[error("sampler exhausted its retry budget: {0}")]
    RetryBudget(String),

    #[error("weight file: {0}")]
    Weights(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
