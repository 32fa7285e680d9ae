use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid site tensor: {0}")]
    InvalidTensor(String),

    /// The two largest transfer-matrix eigenvalues have (numerically) equal
    /// modulus; the MPS is not injective.
    #[error("dominant transfer eigenvalue is degenerate: |λ1| = {lambda1}, |λ2| = {lambda2}")]
    DegenerateDominantEigenvalue { lambda1: f64, lambda2: f64 },

    #[error("block map of range {range} has rank {rank}, need {required}")]
    NotInjective { range: usize, rank: usize, required: usize },

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("derivative weights sum to {0}, expected 1")]
    WeightSumViolation(f64),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("trajectory is not injective at t = {t} (rank {rank} at range {range})")]
    NotInjectiveOnLoop { t: f64, range: usize, rank: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("trajectory not closed: endpoint mismatch {0:.3e}")]
    NotClosed(f64),

    #[error("sample grid is not uniform: {0}")]
    NonUniformGrid(String),

    #[error("integrator could not meet tolerance {tol:.1e} at t = {t} (step {step:.3e})")]
    ToleranceNotMet { t: f64, step: f64, tol: f64 },

    #[error("matrix is not unitary: ‖U†U − 1‖_F = {0:.3e}")]
    NotUnitary(f64),

    #[error("need at least {needed} levels, got {got}")]
    TooFewLevels { needed: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
