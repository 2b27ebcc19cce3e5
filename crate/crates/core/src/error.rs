//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures surfaced by instance loading, model building and solving.
#[derive(Debug, Error)]
pub enum DrccpError {
    /// The instance violates one or more structural invariants.
    #[error("invalid instance: {}", .0.join("; "))]
    Invalid(Vec<String>),

    /// The instance file could not be parsed.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    /// The requested operation does not support this instance structure.
    #[error("unsupported structure: {0}")]
    Unsupported(String),

    /// A subproblem solve failed inside a bisection probe.
    #[error("subsolver failure at t = {t}: {message}")]
    Subsolver { t: f64, message: String },

    /// A numerical routine failed to converge or was handed degenerate data.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, DrccpError>;
