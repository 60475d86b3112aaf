//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the flagging pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value or combination.
    #[error("config error: {0}")]
    Config(String),

    /// File exists but does not follow the expected layout.
    #[error("schema error: {0}")]
    Schema(String),

    /// Data content violates an invariant (non-finite values, bad ranges).
    #[error("data error: {0}")]
    Data(String),

    /// Tensor or layer dimensions do not compose.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Patch set cannot be reassembled (overlapping or missing tiles).
    #[error("assembly error: {0}")]
    Assembly(String),

    /// Metric is undefined for the given inputs (e.g. single-class truth).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("hdf5 error: {0}")]
    Hdf5(#[from] hdf5::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Prefix message-bearing variants with run context (config path,
    /// trial index) while keeping the variant.
    pub fn context(self, ctx: &str) -> Error {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Schema(m) => Error::Schema(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Shape(m) => Error::Shape(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Assembly(m) => Error::Assembly(format!("{ctx}: {m}")),
            Error::UndefinedMetric(m) => Error::UndefinedMetric(format!("{ctx}: {m}")),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
