use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("grid index out of range: level {level}, anchor {anchor}, cell ({row}, {col})")]
    IndexOutOfRange {
        level: usize,
        anchor: usize,
        row: usize,
        col: usize,
    },

    #[error("box center ({cx}, {cy}) lies outside the {width}x{height} image")]
    OutOfBounds {
        cx: f64,
        cy: f64,
        width: f64,
        height: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("assignment does not match prediction layout: {0}")]
    ShapeMismatch(String),

    #[error("cannot assign ground truth: {0}")]
    SlotConflict(String),

    #[error("no ground-truth objects; recall is undefined")]
    NoGroundTruth,

    #[error("{path}: parse error at byte offset {offset} (line {line}, column {column}): {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {location}: {message}")]
    Validation {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("unsupported schema version {found} in {path} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
