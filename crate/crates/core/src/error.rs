use thiserror::Error;

use crate::solver::TraceRecord;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank deficient constraint matrix: smallest eigenvalue of A^T A is {0:e}")]
    RankDeficient(f64),

    #[error("unsupported problem: {0}")]
    Unsupported(String),

    #[error("estimator state error: {0}")]
    EstimatorState(String),

    #[error("solver diverged at iteration {iter} ({} finite trace rows kept)", .trace.len())]
    Diverged { iter: usize, trace: Vec<TraceRecord> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
