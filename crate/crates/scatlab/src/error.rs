use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param(name: &str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter { name: name.to_string(), reason: reason.into() }
}
