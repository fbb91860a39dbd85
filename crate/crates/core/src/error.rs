use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid dimension {0}")]
    InvalidDimension(usize),

    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("vector is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("trace is {0}, expected 1")]
    WrongTrace(f64),

    #[error("determinant {det} is not +1 or -1 modulo {modulus}")]
    InvalidDeterminant { det: i64, modulus: i64 },

    #[error("ket is not a fiducial of the displacement group")]
    NotFiducial,

    #[error("expected {expected} items, found {found}")]
    WrongCardinality { expected: usize, found: usize },

    #[error("state is not in the fiducial orbit")]
    NotInOrbit,

    #[error("SIC label {0} out of range 1..=16")]
    InvalidLabel(usize),

    #[error("reconstruction failed: {0}")]
    NoQualifyingSubset(&'static str),

    #[error("sign pattern matched more than once ({0} assignments)")]
    AmbiguousPattern(usize),

    #[error("sign pattern satisfies its class constraint")]
    ConstraintSatisfied,

    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
