use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series too short: need at least {needed} rows, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("process is not causal (spectral radius {radius})")]
    NotCausal { radius: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("no causal coefficients found after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("parse error at row {row}{}: {message}", col.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        col: Option<usize>,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error objects and FFI status codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InsufficientLength { .. } => "insufficient_length",
            Error::RankDeficient(_) => "rank_deficient",
            Error::NotCausal { .. } => "not_causal",
            Error::Numerical(_) => "numerical_failure",
            Error::Degenerate(_) => "degenerate_sample",
            Error::GenerationFailed { .. } => "generation_failed",
            Error::Parse { .. } => "parse_error",
            Error::Io(_) => "io_error",
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
