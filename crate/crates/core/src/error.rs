use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("velocity quadrature normalization failed: |sum(m) - 1| = {0:e}")]
    Normalization(f64),

    #[error("fixed-point map is not a contraction: eps^(alpha-1) * phi_bar = {0}")]
    NonContraction(f64),

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("adaptive quadrature did not reach tolerance: estimate {value}, error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("coercivity precondition violated: min(1 + eps^(alpha-1) phi) = {0}")]
    Coercivity(f64),

    #[error("time step {dt} exceeds the stability limit {limit}")]
    TimeStep { dt: f64, limit: f64 },

    #[error("non-finite values in the solution at t = {t}")]
    NonFinite { t: f64, state: Box<Vec<f64>> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{0}")]
    Insufficient(String),

    #[error("config line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
