//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model {model} expects {expected} parameter components, got {got}")]
    ModelMismatch {
        model: ModelKind,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidTheta(String),

    #[error("directional derivative requested at a boundary point of the parameter space ({0})")]
    BoundaryPoint(String),

    #[error("degenerate identification region: tau_L = tau_U = 0")]
    DegenerateRegion,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix is not positive semidefinite after jitter retries")]
    NotPsd,

    #[error("estimator cell `{0}` is empty")]
    EmptyCell(&'static str),

    #[error("bootstrap replicate hit empty cells {0} times in a row")]
    BootstrapDegenerate(usize),

    #[error("perturbation path leaves the parameter space at h = {h}, n = {n}")]
    PathOutOfRange { h: f64, n: usize },

    #[error("every replication was degenerate at h = {h}")]
    AllDegenerate { h: f64 },

    #[error("usage: {0}")]
    Usage(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: unknown key `{key}` (valid keys: {valid})")]
    UnknownKey {
        line: usize,
        key: String,
        valid: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from malformed user input rather than a
    /// mathematical or numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Parse { .. } | Error::UnknownKey { .. })
    }
}
