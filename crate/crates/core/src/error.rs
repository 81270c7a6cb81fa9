use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported geometry for this operation: {0}")]
    UnsupportedGeometry(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("effect never attains 1 on the normalized states (maximum {max})")]
    EmptyFace { max: f64 },
    #[error("not an encoding: max |F∘T - I| = {residual}")]
    NotAnEncoding { residual: f64 },
    #[error("no positive-definite invariant form exists")]
    NoInvariantMetric,
    #[error("pure-state norms are not equalized (relative spread {spread})")]
    UnequalPureNorms { spread: f64 },
    #[error("trivial representation has multiplicity {0}, expected 1")]
    TrivialMultiplicity(usize),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("unsupported encoding pair {source_name} -> {target_name}")]
    UnsupportedPair { source_name: String, target_name: String },
    #[error("group is not closed under products (element pair {0}, {1})")]
    NotClosed(usize, usize),
    #[error("problem too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
