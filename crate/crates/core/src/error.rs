use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Cell;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {0} is a wall or outside the grid")]
    NotOpen(Cell),

    #[error("invalid grid layout: {0}")]
    Layout(String),

    #[error("cell {cell} belongs to {count} sub-task regions, expected 2")]
    ActiveCount { cell: Cell, count: usize },

    #[error("path leaves the sub-task region at step {step} before terminating")]
    PathLeftRegion { step: usize },

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("stationary distribution did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("true values disagree at {cell} in sub-task {subtask}: closed form {closed}, linear solve {solved}")]
    ValueMismatch { subtask: usize, cell: Cell, closed: f64, solved: f64 },

    #[error("corrupt record {path}: {reason}")]
    CorruptRecord { path: PathBuf, reason: String },

    #[error("missing input: {0}")]
    MissingData(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
