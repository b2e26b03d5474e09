use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid architecture config: {0}")]
    Config(String),

    #[error("mapping failed: {0}")]
    Mapping(String),

    /// No teleport plan exists and no external resident can be evicted.
    #[error("EPR capacity deadlock on chip {chip} while scheduling gate {gate}")]
    Deadlock { chip: usize, gate: usize },

    #[error("instance exceeds oracle limits: {0}")]
    OracleLimits(String),

    #[error("invalid benchmark request: {0}")]
    Benchmark(String),

    #[error("schedule rejected by validator: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
