use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("row {row}: symbol '{symbol}' is not in the alphabet")]
    InvalidSymbol { row: usize, symbol: char },
    #[error("row {row}: sequence length {found} differs from {expected}")]
    LengthMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("no FASTA records found")]
    NoRecords,
    #[error("difficulty filter selected zero sequences")]
    EmptySplit,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("attention denominator underflow")]
    AttentionUnderflow,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("node {0} has zero degree")]
    ZeroDegree(usize),
    #[error("k = {k} must be smaller than the number of nodes ({n})")]
    TooManyNeighbors { k: usize, n: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("oracle has no entry for sequence {0}")]
    OracleMiss(String),
    #[error("duplicate sequence {0}")]
    DuplicateSequence(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
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

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParam(msg.into())
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
