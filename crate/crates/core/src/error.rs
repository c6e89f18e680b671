use thiserror::Error;

/// Errors produced by the spectral laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: String, found: String },

    #[error("symbol is not finite at wavevector {0:?}")]
    NonFiniteSymbol([f64; 3]),

    #[error("dyadic index {j} outside partition range [{j_min}, {j_max}]")]
    BlockOutOfRange { j: i32, j_min: i32, j_max: i32 },

    #[error("exponent conditions violated: {0}")]
    ExponentConditions(String),

    #[error("time quadrature under-resolved: relative error estimate {estimate:.3e} exceeds {limit:.1e}")]
    QuadratureResolution { estimate: f64, limit: f64 },

    #[error("trajectory does not cover the requested time {requested} (last sample {last})")]
    CoverageGap { requested: f64, last: f64 },

    #[error("input field is not divergence-free (relative residual {0:.3e})")]
    NotDivergenceFree(f64),

    #[error("Picard iteration diverged after {iterations} iterations (outside perturbative regime)")]
    Divergence {
        iterations: usize,
        /// X-norms of successive differences, one per completed iteration.
        history: Vec<f64>,
    },

    #[error("Picard iteration did not reach tolerance within {iterations} iterations")]
    MaxIterations { iterations: usize, history: Vec<f64> },

    #[error("malformed CLF1 data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
