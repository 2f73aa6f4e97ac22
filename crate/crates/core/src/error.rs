use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the snippet engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: cannot parse {cell:?} as a number")]
    Parse { row: usize, cell: String },

    #[error("row {row}: non-finite value {value}")]
    NonFinite { row: usize, value: f64 },

    #[error("row {row}: column {column} out of range ({available} columns)")]
    ColumnOutOfRange {
        row: usize,
        column: usize,
        available: usize,
    },

    #[error("series too short: n = {n}, need at least {min}")]
    TooShort { n: usize, min: usize },

    #[error("window length {window} out of range 1..={n}")]
    WindowOutOfRange { window: usize, n: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("sliding statistics built for window {stats}, requested {requested}")]
    StatsMismatch { stats: usize, requested: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("job for m = {m} failed: {source}")]
    Job {
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("training log: {0}")]
    TrainingLog(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
