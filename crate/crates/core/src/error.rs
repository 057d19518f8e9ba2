use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, OrbitError>;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("k = {0} is not congruent to ±1 mod 6")]
    InvalidK(i64),

    #[error("invalid cap: {0}")]
    InvalidCap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("size budget exceeded: {0}")]
    Budget(String),

    #[error("internal verification failed: {0}")]
    Verification(String),

    #[error("cache rejected: {0}")]
    CacheMismatch(String),

    #[error("cache corrupt: {0}")]
    CacheCorrupt(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl OrbitError {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        OrbitError::Precondition(msg.into())
    }
}
