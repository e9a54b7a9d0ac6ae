use thiserror::Error;

/// Errors produced by the pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("maxval {0} exceeds 255")]
    UnsupportedMaxval(u32),

    #[error("unsupported channel count {0}")]
    UnsupportedChannels(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension chain violated: {0}")]
    DimensionChain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(what: impl Into<String>) -> Error {
    Error::Shape(what.into())
}
