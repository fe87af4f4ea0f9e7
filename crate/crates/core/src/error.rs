use thiserror::Error;

/// Errors raised by the library operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid M: {0}")]
    InvalidM(String),
    #[error("invalid priors: {0}")]
    InvalidPriors(String),
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("m out of range (M/4, M/2): M={big_m}, m={m}")]
    MOutOfRange { big_m: usize, m: i64 },
    #[error("invalid POM: {0}")]
    InvalidPom(String),
    #[error("invalid channel matrix: {0}")]
    InvalidChannel(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("output {0} has zero probability")]
    ZeroProbabilityOutput(usize),
    #[error("invalid number of outputs N={0}; must be 2 or 3")]
    InvalidN(usize),
    #[error("no convergence after {iterations} iterations (gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid window: {0} s")]
    InvalidWindow(f64),
    #[error("invalid repeat count: {0}")]
    InvalidRepeats(usize),
    #[error("no count records for signal {signal}, port {port}")]
    EmptyCell { signal: usize, port: usize },
    #[error("signal {0} has zero total counts")]
    AllZeroSignal(usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
}

pub type Result<T> = std::result::Result<T, Error>;
