use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout mismatch: expected {expected:?}, found {found:?}")]
    LayoutMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("numeric failure in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("incompatible solver: {0}")]
    Incompatible(String),

    #[error("empty sampling region: {0}")]
    EmptyRegion(String),

    #[error("adjoint consistency check failed: relative error {0:e}")]
    AdjointMismatch(f64),

    #[error("certificate `{rule}` rejected the step lengths (margin {margin})")]
    CertificateRejected { rule: String, margin: f64 },

    #[error("{path}:{line}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed image: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
