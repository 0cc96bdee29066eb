//! Crate-wide error type. Every fallible operation returns [`Result`].

/// Errors produced by validation, I/O, parsing, and solver plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A vector or matrix dimension did not match what the operation expects.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A numeric or structural argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A problem exceeds a hard size guard (e.g. exhaustive enumeration limits).
    #[error("size {n} exceeds the supported maximum {max} for {what}")]
    SizeGuard {
        what: &'static str,
        n: usize,
        max: usize,
    },

    /// An operation that needs at least one sample received none.
    #[error("empty data: {0}")]
    EmptyData(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A file or stream failed to parse; `offset` is the byte position where
    /// the problem was detected.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    /// The remote solver connection broke or returned a malformed or
    /// out-of-contract message.
    #[error("remote protocol error: {0}")]
    Protocol(String),

    /// A solver invocation failed; `read` identifies which read of a
    /// multi-read request was being serviced.
    #[error("solver failure on read {read}: {message}")]
    Solver { read: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
