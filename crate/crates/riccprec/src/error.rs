//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the input was violated (dimensions, ranges, flags).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix that must have independent columns (or an invertible penalty
    /// matrix) turned out to be numerically rank-deficient.
    #[error("rank-deficient input at column {column}")]
    RankDeficient { column: usize },

    /// A signal row has zero variance and cannot be normalized.
    #[error("constant signal in row {row}")]
    ConstantSignal { row: usize },

    /// A computation produced a result outside its numerical contract
    /// (non-positive-definite matrix, negative radicand, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The penalty shape does not support the requested fast path.
    #[error("unsupported penalty: {0}")]
    UnsupportedPenalty(String),

    /// A dense materialization was requested above the configured cap.
    #[error("matrix of dimension {n} exceeds the densify cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    /// Statistics cannot be formed because the input carries no variance.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A text cell failed to parse. Row and column are one-based.
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    /// A NaN or infinity was found in the payload. Row and column are one-based.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    /// A binary payload ended before the header-announced size.
    #[error("truncated payload: {0}")]
    Truncated(String),

    /// A binary header did not match the expected format.
    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code class for the CLI: 3 input validation, 4 numerical
    /// failure, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) => 4,
            Error::Io(_) => 5,
            _ => 3,
        }
    }
}
