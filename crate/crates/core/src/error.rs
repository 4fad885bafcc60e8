use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("out of range: {0}")]
    Range(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("data quality: {0}")]
    DataQuality(String),
    #[error("structural error: {0}")]
    Structural(String),
    /// A pathwise law that must hold exactly was violated.
    #[error("law violated: {law} (config digest {digest})")]
    LawViolation { law: String, digest: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
