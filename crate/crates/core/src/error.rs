use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("relative entropy diverges: support of the first argument is not contained in the support of the second")]
    InfiniteDivergence,

    #[error("state is unreconstructable: spectrum has no positive mass")]
    Unreconstructable,

    #[error("CPTP projection did not converge after {iterations} iterations (residual {residual:.3e})")]
    ProjectionNotConverged { iterations: usize, residual: f64 },

    #[error("mode {mode} is unexcited: |mu(0)| = {magnitude:.3e}")]
    ModeUnexcited { mode: usize, magnitude: f64 },

    #[error("mode {mode} carries no kernel information (lambda^1 = 0)")]
    NoKernelInformation { mode: usize },

    #[error("no excited kernel-bearing mode is available")]
    NoKernelMode,

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{n} spectators exceed the brute-force cap of {max}")]
    DimensionCap { n: usize, max: usize },

    #[error("unphysical probability {0:.3e}")]
    UnphysicalProbability(f64),

    #[error("design matrix is rank deficient: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("measurement record is missing setting {0}")]
    MissingSetting(String),

    #[error("initial state is not a product state")]
    NotProductState,

    #[error("loss became non-finite")]
    NonFiniteLoss,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
