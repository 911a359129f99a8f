use thiserror::Error;

/// Errors shared by the numeric, special-function and kernel layers.
///
/// Policy: a non-finite intermediate aborts the enclosing evaluation with
/// `NumericOverflow` instead of letting NaN propagate into a residual check.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value produced during evaluation")]
    NumericOverflow,
    #[error("power of zero base with non-positive real exponent")]
    SingularPower,
    #[error("operand on the branch cut (-inf, 0]")]
    BranchCut,
    #[error("division by zero")]
    DivisionByZero,
    #[error("argument outside the series domain: |u| = {0:.6}")]
    OutsideDomain(f64),
    #[error("series did not converge within the term cap")]
    NoConvergence,
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),
    #[error("integer parameter degeneracy: {0}")]
    IntegerParameterDegeneracy(String),
    #[error("evaluation at a singular point of the operator")]
    EvaluationAtSingularity,
    #[error("logarithmic Frobenius case (exponent difference is an integer)")]
    LogarithmicCase,
    #[error("no reliable truncation estimate within the term budget")]
    NoConvergenceEstimate,
    #[error("accessory-map fit inconsistent: {0}")]
    FitInconsistent(String),
    #[error("group closure exceeded the expected order {0}")]
    ClosureOverflow(usize),
    #[error("group closure stopped below the expected order: got {0}, want {1}")]
    ClosureDeficit(usize, usize),
    #[error("sample point outside the validity region of the local solution")]
    OutsideValidity,
    #[error("no admissible sample point found: {0}")]
    AllPointsInfeasible(String),
    #[error("no common admissible region for the matched families")]
    NoMatchedRegion,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
