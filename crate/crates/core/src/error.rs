use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("negative base reward {value} at ({state}, {action}); shaping requires r >= 0")]
    NegativeReward {
        state: String,
        action: String,
        value: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("refusing to enumerate {count} stationary policies (limit {limit})")]
    TooManyPolicies { count: f64, limit: u64 },

    #[error("non-finite state at integration step {step}")]
    NonFinite { step: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("internal guard tripped: {0}")]
    Guard(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit code: 2 for configuration and I/O, 3 for violated
    /// preconditions, 4 for tripped internal guards.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io { .. } | Error::Json { .. } => 2,
            Error::InvalidInput(_)
            | Error::NegativeReward { .. }
            | Error::Precondition(_)
            | Error::TooManyPolicies { .. }
            | Error::Usage(_) => 3,
            Error::Guard(_) | Error::NonFinite { .. } => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
