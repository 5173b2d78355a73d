use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneoError {
    #[error("matrix is not symmetric (defect {defect:.3e})")]
    NotSymmetric { defect: f64 },
    #[error("matrix is indefinite: pivot {pivot:.3e} at index {index}")]
    IndefiniteMatrix { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pencil is not definite: B-matrix Cholesky failed")]
    PencilNotDefinite,
    #[error("IC(0) breakdown: nonpositive pivot {pivot:.3e} at row {row}")]
    BreakdownNonpositivePivot { row: usize, pivot: f64 },
    #[error("matrix is singular after boundary conditions: no Dirichlet DOFs")]
    SingularAfterBC,
    #[error("element {element} has no owner")]
    UnassignedElement { element: usize },
    #[error("too many subdomains: {requested} requested, at most {max} possible")]
    TooManySubdomains { requested: usize, max: usize },
    #[error("zero diagonal entry at global DOF {dof}")]
    ZeroDiagonal { dof: usize },
    #[error("coarse matrix is singular (rank {rank} of {dim})")]
    CoarseSingular { rank: usize, dim: usize },
    #[error("coarse space spans the whole space (n0 = n = {n})")]
    CoarseIsWholeSpace { n: usize },
    #[error("unsupported combination: {0}")]
    UnsupportedVariant(String),
    #[error("local solver of subdomain {subdomain} is singular")]
    LocalSolverSingular { subdomain: usize },
    #[error("local kernel of subdomain {subdomain} not contained in the coarse space (defect {defect:.3e})")]
    KernelNotInCoarseSpace { subdomain: usize, defect: f64 },
    #[error("problem too large for dense materialization: n = {n}, cap = {cap}")]
    ProblemTooLarge { n: usize, cap: usize },
    #[error("invalid configuration at `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, GeneoError>;

impl From<std::io::Error> for GeneoError {
    fn from(e: std::io::Error) -> Self {
        GeneoError::Io(e.to_string())
    }
}
