//! Two-level abstract Schwarz preconditioners with GenEO coarse spaces,
//! a 2D linear elasticity testbed and a dense spectral oracle.

pub mod error;
pub mod experiment;
pub mod geneo;
pub mod krylov;
pub mod linalg;
pub mod oracle;
pub mod partition;
pub mod problem2d;
pub mod schwarz;

pub use error::{GeneoError, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, Setup};
pub use geneo::{FlatVariant, GenEOConfig, GenEOSpectra};
pub use krylov::{pcg, ppcg, KrylovConfig, SolveReport, StoppingRule};
pub use linalg::{DenseMatrix, LinearOperator, SparseSymMatrix};
pub use oracle::{BoundCheck, BoundParams, SpectrumReport, TheoryBounds};
pub use partition::{PartitionMethod, PartitionSpec, PouKind, RestrictionMap};
pub use problem2d::{CoefficientKind, Mesh2D, ProblemInstance};
pub use schwarz::{CoarseSpace, LocalSolverSet, Mode, SchwarzPreconditioner, Variant};
