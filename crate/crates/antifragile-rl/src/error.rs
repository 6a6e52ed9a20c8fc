//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector/matrix dimensions do not line up.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Field evaluation requested at a degenerate point (at the goal, inside
    /// an obstacle, or on a vanishing gradient).
    #[error("degenerate geometry: {0}")]
    Geometry(String),

    /// An operation was called on an episode or run that is already finished.
    #[error("lifecycle violation: {0}")]
    Lifecycle(&'static str),

    /// Invalid configuration value or unparseable config file.
    #[error("config error: {0}")]
    Config(String),

    /// A required upstream artifact (checkpoint, results dir) is missing.
    #[error("dependency error: {0}")]
    Dependency(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 dependency, 4 numeric, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dependency(_) => 3,
            Error::NonFinite(_) | Error::Shape { .. } | Error::Geometry(_) => 4,
            _ => 1,
        }
    }
}
