use thiserror::Error;

/// Errors raised by the operator-sphere routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("zero variance: cannot standardize a constant vector")]
    ZeroVariance,

    #[error("operator is not W-symmetric positive semi-definite: {0}")]
    NotWSpsd(String),

    #[error("matrix is rank deficient (smallest eigenvalue {smallest:e}, floor {floor:e})")]
    RankDeficient { smallest: f64, floor: f64 },

    #[error("invalid categorical variable: {0}")]
    InvalidCategorical(String),

    #[error("metric is not symmetric positive definite")]
    NotSpd,

    #[error("zero operator: {0}")]
    ZeroOperator(&'static str),

    #[error("operator is not normed (norm {0})")]
    NotNormed(f64),

    #[error("scalar product {0} lies outside the admissible range [-1, 1]")]
    CosineOutOfRange(f64),

    #[error("rank {requested} exceeds available rank {available}")]
    RankTooLarge { requested: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular derivative: scalar product {0} too close to 1")]
    SingularDerivative(f64),

    #[error("zero gradient: point is already critical")]
    ZeroGradient,

    #[error("degenerate arc between antipodal operators")]
    DegenerateArc,

    #[error("total inertia is zero: all resultants coincide with their average")]
    ZeroInertia,

    #[error("partitions are defined on different ground sets ({0} vs {1} items)")]
    GroundSetMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
