use thiserror::Error;

/// Errors surfaced by the exact algebra layer.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("truncation mismatch: {0} vs {1}")]
    TruncationMismatch(u32, u32),
    #[error("cannot mix t-power orders with square-zero orders in one operation")]
    MixedOrderKinds,
    #[error("series terms must have order >= 1")]
    ZeroOrder,
    #[error("truncation must be >= 1")]
    ZeroTruncation,
    #[error("square-zero splitting supports at most 64 variables, got {0}")]
    TooManyVariables(u32),
    #[error("series has a term of order {order} above the splitting bound {bound}")]
    SplitOrderExceeded { order: u32, bound: u32 },
    #[error("operation requires t-power orders only")]
    ExpectedPowerOrders,
    #[error("operation requires square-zero orders only")]
    ExpectedSquareZeroOrders,
    #[error("zero exponent is not allowed here")]
    ZeroExponent,
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

/// Errors from diagram construction and completion.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum DiagramError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("ray direction must be primitive, got ({0}, {1})")]
    NonPrimitiveDirection(i64, i64),
    #[error("ray directions must not be parallel")]
    ParallelDirections,
    #[error("ray function exponent ({0}, {1}) is not negatively collinear with the ray direction")]
    BadExponent(i64, i64),
    #[error("window is empty or inverted")]
    EmptyWindow,
    #[error("window bottom edge dips below the parabola y = -x^2/2")]
    WindowBelowParabola,
    #[error("ray base ({0}, {1}) lies below the parabola y = -x^2/2")]
    BaseBelowParabola(String, String),
    #[error("ray support does not meet the window")]
    SupportOutsideWindow,
    #[error("perturbation offsets collided {0} times in a row; diagram too degenerate")]
    PerturbationCollision(u32),
    #[error("perturbation oracle requires ingoing rays with at most their own propagations")]
    UnsupportedOracleInput,
    #[error("completion failed to stabilize at order level {0}")]
    NonterminatingLevel(u32),
}

/// Errors from the invariant extraction pipeline.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ExtractError {
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("insufficient truncation order: degree {degree} needs order >= {needed}, diagram has {have}")]
    InsufficientOrder { degree: u32, needed: u32, have: u32 },
    #[error("vertical asymptote x = {0} lies outside the window")]
    AsymptoteOutsideWindow(String),
    #[error("missing vertical data for torsion index {0}")]
    MissingTorsionLine(u64),
    #[error("{0} does not divide {1}")]
    NotADivisor(u64, u64),
    #[error("missing table entry for d = {0}, index {1}")]
    MissingEntry(u32, i64),
}
