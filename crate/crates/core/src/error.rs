use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its documented domain.
    #[error("configuration error: {0}")]
    Config(String),

    /// A malformed input record.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    /// Structurally inconsistent input (column counts, label kinds).
    #[error("schema error: {0}")]
    Schema(String),

    /// Every order in the accountant grid produced an infinite budget.
    #[error("insufficient noise: privacy budget is infinite at every order")]
    InsufficientNoise,

    #[error("calibration error: {0}")]
    Calibration(String),

    /// Inputs outside the domain on which an analytic bound is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 2 for configuration/input problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Schema(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
