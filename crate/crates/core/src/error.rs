use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("step at t = {time} failed: {msg}")]
    Step { time: f64, msg: String },

    #[error("integration diverged at t = {time} (|v| = {norm:.3e})")]
    Instability { time: f64, norm: f64 },

    #[error("quadrature did not converge: estimated error {estimate:.3e} after {subdivisions} subdivisions")]
    Quadrature { estimate: f64, subdivisions: usize },

    #[error("error metric undefined: {0}")]
    Metric(String),

    #[error("reference solution rejected: {0}")]
    Reference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
