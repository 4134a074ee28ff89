use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("composite dimension {requested} exceeds the cap of {cap}")]
    DimensionLimit { requested: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("module elements belong to different spaces: {0}")]
    SpaceMismatch(String),

    #[error("exact Haar rule is only available for SU(2), got SU({0})")]
    UnsupportedExact(usize),

    #[error("integrand returned a {found}x{found} matrix, expected {expected}x{expected}")]
    InconsistentDimensions { expected: usize, found: usize },

    #[error("partial sums fail the Cauchy test at truncation {k_max}")]
    DivergentSum { k_max: usize },

    #[error("algebra element is not a co-isometry (||aa* - id|| = {defect:e})")]
    NotCoisometry { defect: f64 },

    #[error("basis fails orthonormality (defect {defect:e} > {tolerance:e})")]
    GramDefect { defect: f64, tolerance: f64 },

    #[error("index {0} is outside the domain of the pairing")]
    OutOfDomain(u64),

    #[error("requested truncation {requested} exceeds the {available} materialized isometries")]
    TruncationExceeded { requested: usize, available: usize },

    #[error("invalid node subset: {0}")]
    InvalidSubset(String),

    #[error("node has the wrong kind for this family: {0}")]
    InvalidNode(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
