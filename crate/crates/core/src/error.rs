use thiserror::Error;

/// Errors raised by the decompositions and their I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("index {index} out of range for dimension {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("duplicate index {0} in index list")]
    DuplicateIndex(usize),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular {side} block in middle-matrix solve (numerical rank {rank} < {k})")]
    SingularBlock {
        side: &'static str,
        rank: usize,
        k: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
