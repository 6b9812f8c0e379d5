use thiserror::Error;

/// Errors shared by all simulator modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),

    #[error("hafnian requires even dimension, got {0}")]
    OddDimension(usize),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("collision-free mode requires pairwise-distinct prefix entries")]
    CollidingPrefix,

    #[error("collision-free mode requires n <= m, got n={n}, m={m}")]
    CollisionFreeRegime { n: usize, m: usize },

    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
