use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid channel spec: {0}")]
    InvalidSpec(String),

    #[error("non-square matrix: row {row} has {found} values, expected {expected}")]
    NonSquare {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("out of range at ({row},{col}): {value}")]
    OutOfRange { row: usize, col: usize, value: f64 },

    #[error("nonzero diagonal at ({index},{index}): {value}")]
    NonzeroDiagonal { index: usize, value: f64 },

    #[error("matrix needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
