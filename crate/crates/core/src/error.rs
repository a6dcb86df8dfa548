use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the binary-format readers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic number 0x{found:08x} (expected 0x{expected:08x})")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated input: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("trailing bytes: expected {expected} bytes, found {found}")]
    TrailingBytes { expected: usize, found: usize },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at record {index} is outside 0..=9")]
    BadLabel { index: usize, label: u8 },
    #[error("length {len} is not a multiple of the {record}-byte record size")]
    RecordSize { len: usize, record: usize },
    #[error("unsupported image extents {rows}x{cols}")]
    Extents { rows: usize, cols: usize },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer} ({kind}): expected {expected:?}, got {got:?}")]
    Shape {
        layer: usize,
        kind: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    Tensor(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {0} is not +1 or -1")]
    Label(f64),
    #[error("unsupported architecture: {0}")]
    Architecture(String),
    #[error("degenerate network: {0}")]
    Degenerate(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("parse error in {source_name}: {error}")]
    Parse {
        source_name: String,
        error: ParseError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("budget exhausted: {accepted} of {target} networks after {draws} draws")]
    BudgetExhausted {
        accepted: usize,
        target: usize,
        draws: u64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: impl Into<String>, error: ParseError) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            error,
        }
    }
}
