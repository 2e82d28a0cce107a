use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("matrix is not symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("matrix order must be at least 1")]
    EmptyMatrix,

    #[error("matrix contains a non-finite entry at ({i},{j})")]
    NonFiniteEntry { i: usize, j: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal {off_diag:e})")]
    EigenNoConvergence { sweeps: usize, off_diag: f64 },

    #[error("invalid gain configuration: {0}")]
    InvalidGains(String),

    #[error("invalid simulation configuration: {0}")]
    InvalidSimConfig(String),

    #[error("invalid disturbance specification: {0}")]
    InvalidDisturbance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("bisection could not bracket a root: {0}")]
    NoBracket(String),

    #[error("numerical abort at step {step} (t = {t}): non-finite state {state:?}")]
    NumericalAbort { step: usize, t: f64, state: Vec<f64> },

    #[error("metric needs at least {needed} samples in the window, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("trajectory csv: {0}")]
    Csv(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),
}
