use thiserror::Error;

#[derive(Debug, Error)]
pub enum RansicError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("vector norm too small for normalization")]
    ZeroVector,

    #[error("sample budget of {samples} draws exhausted without termination")]
    SampleBudgetExhausted { samples: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("arity error at line {line}: expected {expected} fields, found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = RansicError> = std::result::Result<T, E>;
