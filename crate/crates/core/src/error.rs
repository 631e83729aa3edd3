//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index out of range: {index} not in [1, {n}]")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("certification failure: {0}")]
    CertificationFailure(String),

    #[error("absolute continuity violation: Q({i},{j}) = {q} but P({i},{j}) = 0")]
    AbsoluteContinuity { i: usize, j: usize, q: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("smooth case requires a smoothness constant alpha")]
    MissingAlpha,

    #[error("config error: {0}")]
    ConfigError(String),
}

pub type Result<T> = std::result::Result<T, Error>;
