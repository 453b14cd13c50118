use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zone {zone}: {reason}")]
    Zone { zone: usize, reason: String },
    #[error("invalid network: {0}")]
    Network(String),
    #[error("node {0} is unreachable from every depot")]
    Unreachable(u32),
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("invariant violated at t={t}s: {msg}")]
    Invariant { t: f64, msg: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("standard deviation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
