use thiserror::Error;

use crate::scenario::Destination;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unknown configuration key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cache overflow at {destination}: {used} bits offloaded, capacity {capacity} bits")]
    CacheOverflow {
        destination: Destination,
        used: f64,
        capacity: f64,
    },

    #[error("numeric fault in layer {layer}: {what}")]
    NumericFault { layer: usize, what: String },

    #[error("{what} is too large to enumerate: {size} > {limit}")]
    TooLarge { what: String, size: u128, limit: u128 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
