use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix is not positive semidefinite: pivot {pivot} at index {index} is below -{jitter}")]
    NotPsd { index: usize, pivot: f64, jitter: f64 },

    #[error("matrix is not Hermitian: |a[{i}][{j}] - conj(a[{j}][{i}])| = {deviation:e}")]
    NotHermitian { i: usize, j: usize, deviation: f64 },

    #[error("too few samples for covariance estimation: {got} selected, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("infeasible sampling mask: {0}")]
    InfeasibleSpec(String),

    #[error("problem too large for exhaustive computation: n = {n} exceeds limit {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("reference map is constant; correlation is undefined")]
    DegenerateReference,

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("invalid value for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::ShapeMismatch {
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InfeasibleSpec(_) | Error::ShapeMismatch { .. } => 2,
            Error::NotPsd { .. }
            | Error::NotHermitian { .. }
            | Error::SizeLimit { .. }
            | Error::TooFewSamples { .. }
            | Error::DegenerateReference
            | Error::NonFinite(_) => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }
}
