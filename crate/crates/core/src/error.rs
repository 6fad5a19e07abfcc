use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown action {action} for policy row {row}")]
    UnknownAction { row: usize, action: usize },

    #[error("bad magic: not an index file")]
    BadMagic,

    #[error("unsupported index file version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated index file: {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("backend transport error: {0}")]
    Transport(String),

    #[error("backend protocol error: {0}")]
    BackendProtocol(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Backend and transport failures are reported separately from bad input.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::BackendProtocol(_))
    }

    pub fn is_invariant(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
