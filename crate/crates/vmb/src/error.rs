use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("state error: {0}")]
    State(String),
    #[error("assembly inconsistency: {0}")]
    Assembly(String),
    #[error("truncation diagnostic: {0}")]
    Truncation(String),
    #[error("step size error: dt = {dt} exceeds limit {limit}")]
    StepSize { dt: f64, limit: f64 },
    #[error("divergence detected at t = {0}")]
    Divergence(f64),
    #[error("solvability error: {0}")]
    Solvability(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
