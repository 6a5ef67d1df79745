use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("small divisor {divisor:.3e} below guard {guard:.3e} at k={k} k_bar={k_bar}")]
    SmallDivisor { k: String, k_bar: String, divisor: f64, guard: f64 },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("lie series may diverge: {0}")]
    Divergence(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
