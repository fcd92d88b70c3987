use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular metric: det g = {det:e}")]
    SingularMetric { det: f64 },

    #[error("weight matrix undefined at p = {p:?}")]
    WeightUndefined { p: Vec<f64> },

    #[error("weight evaluated at the zero vector")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("weight validation failed: {0}")]
    ValidationFailed(String),

    #[error("grid too small: need at least {needed} points per axis, got {got}")]
    GridTooSmall { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("point {point:?} lies outside the boundary collar (|sdf| = {sdf:e}, collar = {collar:e})")]
    OutsideCollar {
        point: Vec<f64>,
        sdf: f64,
        collar: f64,
    },

    #[error("grid resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("Newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStall { iterations: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("solve did not converge")]
    NotConverged,

    #[error("unknown surface `{0}`")]
    UnknownSurface(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
