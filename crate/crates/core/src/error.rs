use thiserror::Error;

pub type Result<T> = std::result::Result<T, GiaError>;

#[derive(Debug, Error)]
pub enum GiaError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("offset distribution reaches norm {norm}, beyond the cutoff radius {bound}")]
    OffsetOutOfRange { norm: f64, bound: f64 },

    #[error("pathloss undefined for coincident points")]
    CoincidentPoints,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pair ({receiver}, {transmitter}) does not belong to this subset")]
    ForeignPair { receiver: usize, transmitter: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("leakage solver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    NonConvergence { max_residual: f64, iterations: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("malformed channel dump: {0}")]
    MalformedDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}
