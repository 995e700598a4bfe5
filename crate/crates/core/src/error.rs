use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has no {0} samples")]
    MissingClass(&'static str),

    #[error("minibatch {chunk} contains only one class; reduce the number of minibatches")]
    OneClassMinibatch { chunk: usize },

    #[error("split part `{0}` would be empty")]
    EmptySplitPart(&'static str),

    #[error("threshold solver did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("threshold derivative has a zero denominator")]
    ZeroDenominator,

    #[error("objective became non-finite at iteration {iteration} (|w| = {w_norm})")]
    Diverged { iteration: usize, w_norm: f64 },

    #[error("rank table is missing method `{method}` on dataset `{dataset}` for `{criterion}`")]
    MissingCell {
        method: String,
        dataset: String,
        criterion: String,
    },

    #[error("every grid point failed to train")]
    NoSuccessfulRun,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
