use thiserror::Error;

/// Errors produced by tensor construction, problem assembly and solving.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("moment basis dimension {dim} exceeds cap {cap}")]
    SizeLimit { dim: usize, cap: usize },

    #[error("block {block} is not unit-norm (|x| = {norm})")]
    NonUnitBlock { block: usize, norm: f64 },

    #[error("block {block} has negative components")]
    NegativeBlock { block: usize },

    #[error("no odd-degree group to lift")]
    NoOddGroup,

    #[error("group {group} has degree {degree}, expected {expected}")]
    DegreeMismatch {
        group: usize,
        degree: usize,
        expected: usize,
    },

    #[error("odd degree present in group {0}; lift before assembling")]
    OddDegree(usize),

    #[error("degenerate moment vector: no positive diagonal moment")]
    DegenerateMoments,

    #[error("lift record inconsistent with basis: {0}")]
    LiftMismatch(String),

    #[error("linear reduction not applicable: {0}")]
    ReductionNotApplicable(String),

    #[error("normalization matrix is zero; problem is malformed")]
    ZeroNormalization,

    #[error("eigendecomposition failed")]
    EigFailure,

    #[error("solver diverged: residual {0:.3e}")]
    Diverged(f64),

    #[error("grid of {0} points exceeds the {1}-point cap")]
    GridTooLarge(u64, u64),

    #[error("bound hypothesis violated: need n_i >= d_i, got n={n}, d={d} in group {group}")]
    BoundHypothesis { group: usize, n: usize, d: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
