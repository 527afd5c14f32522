use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dyadic level {level} exceeds the configured maximum {max}")]
    LevelOverflow { level: u32, max: u32 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("time {time} is not a node of the path grid (step {step})")]
    OffGrid { time: f64, step: f64 },

    #[error("no conditional-mean oracle for germ `{0}`")]
    UnsupportedOracle(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("enumeration too large: depth {depth} exceeds {max}")]
    EnumerationTooLarge { depth: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
