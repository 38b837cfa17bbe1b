use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },

    #[error("matrix diagonal entry {i} is {value}, expected 1")]
    NotUnitDiagonal { i: usize, value: f64 },

    #[error("correlation entry ({i},{j}) = {value} outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },

    #[error("matrix not positive definite: pivot {index} = {pivot:.6e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("repeated variable: |r[{i}][{j}]| = 1 off the diagonal")]
    RepeatedVariable { i: usize, j: usize },

    #[error("degenerate correlation: |r| = {r} >= 1")]
    DegenerateCorrelation { r: f64 },

    #[error("orthant oracle supports n <= 3, got n = {n}")]
    UnsupportedDimension { n: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("c/d validation failed for pivot {pivot}: {summary}")]
    CdValidation { pivot: usize, summary: String },

    #[error(
        "h = {h} too large: threshold u - r[{j}][pivot](u + h) = {threshold} is negative"
    )]
    HTooLarge { h: f64, j: usize, threshold: f64 },

    #[error("B(delta) undefined: c[{index}] = {value} <= 0")]
    BUndefined { index: usize, value: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("instance too large: dimension {dim} exceeds cap {cap}")]
    InstanceTooLarge { dim: usize, cap: usize },

    #[error("empty prime range: y = {y} exceeds x = {x}")]
    EmptyPrimeRange { y: f64, x: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),
}
