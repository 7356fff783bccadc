//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("degenerate sample")]
    DegenerateSample,

    #[error("zero vector")]
    ZeroVector,

    #[error("constant labels")]
    ConstantLabels,

    #[error("no signal")]
    NoSignal,

    #[error("label {0:+} absent")]
    LabelAbsent(i8),

    #[error("class {0} absent")]
    ClassAbsent(i32),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("hook mismatch: {0}")]
    HookMismatch(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Wraps a stage error with the experiment cell it occurred in.
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_cell(self, cell: impl Into<String>) -> Self {
        Error::Cell {
            cell: cell.into(),
            source: Box::new(self),
        }
    }
}
