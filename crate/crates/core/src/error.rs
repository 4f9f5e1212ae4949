use thiserror::Error;

/// Errors produced by the simulation core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid kernel profile: {0}")]
    Profile(String),
    #[error("degenerate kernel: 1 - K(w) vanishes at w = {0:?}")]
    DegenerateKernel([i64; 2]),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("enumeration budget exceeded: {spins} spins (max {max})")]
    Budget { spins: usize, max: usize },
    #[error("not enough samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
