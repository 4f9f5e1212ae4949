use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] ising_kac_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// Unknown or malformed configuration key.
    #[error("config key `{key}`: {reason}")]
    Schema { key: String, reason: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("bad file format: {0}")]
    Format(String),
}

pub type LabResult<T> = std::result::Result<T, LabError>;
