use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coefficient assumptions violated: {0}")]
    Assumption(String),

    #[error("inverse entropy map overflow for species {species} at node {node} (w = {w})")]
    InverseOverflow { species: usize, node: usize, w: f64 },

    #[error("inverse entropy map failed for y = {0}")]
    InverseFailed(f64),

    #[error("step {step}: continuation failed at sigma = {sigma} (residual {residual:e}): {detail}")]
    Continuation {
        step: usize,
        sigma: f64,
        residual: f64,
        detail: String,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
