use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("SVD did not converge after {sweeps} Jacobi sweeps")]
    SvdNoConvergence { sweeps: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pair (C, A) is not observable: rank {rank} < state dimension {n}")]
    Unobservable { rank: usize, n: usize },

    #[error("output dimensions differ: {m1} vs {m2}")]
    OutputDimMismatch { m1: usize, m2: usize },

    #[error("invalid transfer function: {0}")]
    InvalidTransferFunction(String),

    #[error("transfer function is identically zero")]
    ZeroSystem,

    #[error("feedback closure drops the denominator degree")]
    DegenerateFeedback,

    #[error("trajectory is identically zero")]
    ZeroTrajectory,

    #[error("could not draw a nonzero trajectory after {retries} retries")]
    RetryCapExceeded { retries: usize },

    #[error(
        "trajectory sets are not separable at horizon {horizon}: rank [O1 O2] = {rank} < {required}{}",
        match .min_horizon {
            Some(n) => format!(" (smallest feasible horizon is {n})"),
            None => " (no horizon is feasible)".to_string(),
        }
    )]
    Infeasible {
        horizon: usize,
        rank: usize,
        required: usize,
        min_horizon: Option<usize>,
    },

    #[error("observability matrix of system {system} has rank {rank} < {n}")]
    RankDeficient { system: usize, rank: usize, n: usize },

    #[error("training data admit no separating hyperplane through the origin (witness points {witnesses:?})")]
    NotSeparable { witnesses: Vec<usize> },

    #[error("training data must contain both labels")]
    SingleClass,

    #[error("empty dataset")]
    EmptyData,

    #[error("dual solver did not converge after {iterations} iterations (KKT residual {residual:e})")]
    SolverNoConvergence { iterations: usize, residual: f64 },

    #[error("margin chain violated: {0}")]
    ChainViolation(String),

    #[error("classifier was loaded without its per-class projections")]
    MissingProjections,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
