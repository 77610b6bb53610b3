use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum QqcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigendecomposition did not converge within {0} sweeps")]
    EigenNonConvergence(usize),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("POVM elements deviate from a resolution of the identity by {0:e}")]
    PovmIncomplete(f64),

    #[error("purifications disagree on the shared system by {0:e}")]
    PurificationMismatch(f64),

    #[error("workspace too small: need dimension {needed}, have {available}")]
    WorkspaceTooSmall { needed: usize, available: usize },

    #[error("invalid problem instance: {0}")]
    InvalidProblem(String),

    #[error("error parameter {0} is outside the admissible range")]
    InvalidEpsilon(f64),

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("relation R is empty because g is constant")]
    EmptyRelation,

    #[error("no witness exists for q = {q}: the bound is {bound}")]
    QueryCountAtOrAboveBound { q: usize, bound: f64 },

    #[error("malformed program: {0}")]
    MalformedProgram(String),

    #[error("solver undecided after {0} iterations")]
    SolverUndecided(usize),

    #[error("program is infeasible")]
    Infeasible,

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("rank estimation failed: {0}")]
    RankEstimation(String),

    #[error("SDPA parse error on line {line}: {msg}")]
    SdpaParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = QqcError> = std::result::Result<T, E>;
