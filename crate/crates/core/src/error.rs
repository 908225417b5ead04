use thiserror::Error;

use crate::dsl::DslError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dsl(#[from] DslError),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("immersion condition fails: first derivatives have rank < {n} (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficient { n: usize, ratio: f64 },

    #[error("normal space dimension mismatch: expected {expected}, found {found}")]
    NormalDimension { expected: usize, found: usize },

    #[error("jet is inconsistent with the ambient sphere: {0}")]
    OffSphere(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("frame is not orthonormal (residual {0:.3e})")]
    NotOrthonormal(f64),

    #[error("normal vector is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("matrix is not symmetric (residual {0:.3e})")]
    Asymmetric(f64),

    #[error("not an equality-case tensor: {0}")]
    NotEqualityCase(String),

    #[error("no adapted basis found (best residual {0:.3e})")]
    NoAdaptedBasis(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("umbilical point")]
    Umbilical,

    #[error("shape operators are not simultaneously diagonalizable: {0}")]
    NotSimultaneouslyDiagonalizable(String),

    #[error("hypothesis fails: {0}")]
    HypothesisFails(String),

    #[error("not an ovaloid sample: {0}")]
    NotOvaloid(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
