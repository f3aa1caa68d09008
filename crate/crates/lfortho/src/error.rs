use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("series did not converge within {0} terms")]
    NonConvergent(usize),
    #[error("singular leading minor at pivot {0}")]
    SingularMinor(usize),
    #[error("insufficient moments: need {need}, have {have}")]
    InsufficientMoments { need: usize, have: usize },
    #[error("denominator {name} underflows at n = {n}")]
    DenominatorUnderflow { name: &'static str, n: usize },
    #[error("truncation buffer exhausted: no valid rows remain")]
    BufferExhausted,
    #[error("index n = {n} outside valid range {lo}..={hi}")]
    OutOfRange { n: usize, lo: usize, hi: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
