use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("two-index functions are stored on ordered pairs only (got s = {s} > t = {t})")]
    Unordered { s: usize, t: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("covariance factorisation failed at fine node {0} (non-positive pivot)")]
    Factorisation(usize),

    #[error("missing history: {0}")]
    MissingHistory(String),

    #[error("sewing did not converge: {0}")]
    Sewing(String),

    #[error("Gubinelli derivative does not match G(y, z) at node {node}: {detail}")]
    DerivativeMismatch { node: usize, detail: String },

    #[error("Picard step of {nodes} cells did not contract (observed ratio {ratio:.3e})")]
    StepTooLarge { nodes: usize, ratio: f64 },

    #[error("step underflow at t = {time}: {detail}")]
    StepUnderflow { time: f64, detail: String },

    #[error("only {0} usable pairs for the slope fit (need at least 8)")]
    TooFewPairs(usize),

    #[error("driver cache: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
