use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group sizes must be non-empty and every group needs at least one user")]
    EmptyGroups,
    #[error("power split {0} is outside the open interval (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mean squared error must be strictly positive, got {0}")]
    NonPositiveMse(f64),
    #[error("weight and coefficient must be strictly positive")]
    NonPositiveWeight,
    #[error("channel entries must be finite")]
    NonFiniteChannel,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("conic subproblem is infeasible")]
    Infeasible,
    #[error("conic solver reported numerical trouble")]
    NumericalTrouble,
    #[error("the concatenation scheme has no power split to optimize")]
    SchemeHasNoAlpha,
    #[error("every power split on the grid was infeasible")]
    AllInfeasible,
    #[error("instance too large for the brute-force oracle")]
    TooLarge,
}
