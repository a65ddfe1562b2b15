use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid s-parameter {0}: quasiprobability functions are only defined here for s <= 0")]
    InvalidS(f64),
    #[error("invalid state parameter: {0}")]
    InvalidState(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid mode selection: {0}")]
    InvalidMode(String),
    #[error("Fock cutoff n_max = {n_max} too small: neglected population {neglected:.3e}")]
    CutoffTooSmall { n_max: usize, neglected: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
