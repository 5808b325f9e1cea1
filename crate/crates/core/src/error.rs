use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("ragged input: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("parse error at row {row}, column {col}: {value:?} is not a number")]
    Parse { row: usize, col: usize, value: String },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("{what} needs {requested} bytes, above the memory cap of {cap} bytes")]
    Capacity {
        what: &'static str,
        requested: u128,
        cap: u64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("incompatible sketches: {0}")]
    IncompatibleSketch(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular value {index} of the sketch is exactly zero; refusing to invert")]
    SingularInversion { index: usize },

    #[error("SVD of a {rows}x{cols} matrix did not converge")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("unsupported sketch family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
