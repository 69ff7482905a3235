use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("covariance factorization failed: {0}")]
    Factorization(String),
    #[error("unsupported instance: {0}")]
    Unsupported(String),
    #[error("non-finite state at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },
    #[error("control energy {energy} exceeds the S_M bound {bound}")]
    EnergyGate { energy: f64, bound: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
