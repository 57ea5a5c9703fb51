use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {left} and {right}")]
    Dimension {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("SVD did not converge after {sweeps} sweeps on a {rows}x{cols} matrix")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
    },

    #[error("non-finite value produced for task {task} at update {k}")]
    NonFinite { task: usize, k: usize },

    #[error("staleness {staleness} exceeds tau_max {tau_max} (task {task}, update {k})")]
    StalenessExceeded {
        task: usize,
        k: usize,
        staleness: usize,
        tau_max: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: impl ToString, right: impl ToString) -> Self {
        Error::Dimension {
            op,
            left: left.to_string(),
            right: right.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics themselves (divergence, SVD breakdown,
    /// staleness violations) as opposed to bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SvdNoConvergence { .. } | Error::NonFinite { .. } | Error::StalenessExceeded { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
