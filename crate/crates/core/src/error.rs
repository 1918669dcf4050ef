use thiserror::Error;

/// Every failure the library reports. Verification failures are not errors;
/// they are carried inside certificates.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("outcome {outcome} has zero probability under the prior")]
    ZeroProbabilityOutcome { outcome: usize },
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("no strict-margin perturbation exists: {0}")]
    InfeasiblePerturbation(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("internal invariant failed: {0}")]
    InternalInvariantFailure(String),
    #[error("no mixing weight reaches the target payoff: {0}")]
    NoIndifferencePoint(String),
    #[error("disclosure and no-disclosure payoff graphs do not intersect: {0}")]
    NoIntersection(String),
    #[error("second incentive constraint fails: {0}")]
    SecondIcFail(String),
    #[error("budget exceeded for {what} (limit {limit})")]
    BudgetExceeded { what: String, limit: usize },
    #[error("hypothesis fails at beliefs {violating:?}")]
    HypothesisFail { violating: Vec<String> },
    #[error("bad radius: {0}")]
    BadRadius(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{field} (line {line}): {message}")]
    Scenario {
        field: String,
        line: usize,
        message: String,
    },
    #[error("linear program: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
