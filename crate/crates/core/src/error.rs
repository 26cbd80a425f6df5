use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solvers, certificates, experiments and file formats.
#[derive(Debug, Error)]
pub enum AotError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("balance error: source total {source_total} != target total {target_total}")]
    Balance { source_total: f64, target_total: f64 },

    #[error("convergence error after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("certification error: {0}")]
    Certification(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("divergence error: non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AotError {
    /// Process exit code for the command line: 1 for bad input, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AotError::Convergence { .. }
            | AotError::Certification(_)
            | AotError::Divergence { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AotError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, AotError>;
