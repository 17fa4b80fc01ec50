use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad grid sizes, malformed config files, violated preconditions on inputs.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    /// M(lambda) could not be inverted; usually an embedded eigenvalue at lambda^4.
    #[error("numerically singular Birman-Schwinger operator at lambda = {lambda:.6e} (smallest singular value {sigma_min:.3e})")]
    Singular { lambda: f64, sigma_min: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
