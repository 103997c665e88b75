use alloc::string::String;

use crate::series::SampleSpace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("series has {len} observations, at least {min} required")]
    TooShort { len: usize, min: usize },
    #[error("observation {index} ({value}) is outside the {space:?} sample space")]
    SpaceViolation {
        index: usize,
        value: f64,
        space: SampleSpace,
    },
    #[error("observation {index} ({value}) is not strictly inside ({lower}, {upper})")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inadmissible parameter: {0}")]
    Inadmissible(String),
    #[error("restriction {restriction} does not apply to family {family}")]
    FamilyMismatch { restriction: String, family: String },
    #[error("invalid restriction: {0}")]
    InvalidRestriction(String),
    #[error("singular design matrix")]
    SingularDesign,
    #[error("restriction covariance R Σ R' is singular for {0}")]
    SingularRestriction(String),
    #[error("non-stationary process: {0}")]
    NonStationary(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = core::result::Result<T, Error>;
