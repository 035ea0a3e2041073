use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{context}: dimension mismatch (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{context}: negative entry at index {index}")]
    NegativeEntry { context: &'static str, index: usize },
    #[error("{context}: variance must be positive, got {value}")]
    NonPositiveVariance { context: &'static str, value: f64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("GAMP diverged at iteration {iteration}: {quantity} became non-finite")]
    Diverged { iteration: usize, quantity: &'static str },
    #[error("{0} has zero energy")]
    ZeroEnergy(&'static str),
    #[error("insufficient support for model-order scoring: U = {0} < 2")]
    InsufficientSupport(f64),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
