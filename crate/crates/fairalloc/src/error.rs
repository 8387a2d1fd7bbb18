use thiserror::Error;

use crate::rational::Rational;
use crate::scenario::UserId;

/// A single violated scenario invariant. Validation collects all of them
/// instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationIssue {
    #[error("scenario has no users")]
    NoUsers,
    #[error("scenario has no resources")]
    NoResources,
    #[error("duplicate user id {0}")]
    DuplicateId(UserId),
    #[error("user {user}: demand has {got} entries, scenario has {expected} resources")]
    DemandLengthMismatch {
        user: UserId,
        expected: usize,
        got: usize,
    },
    #[error("user {user}: weight has {got} entries, scenario has {expected} resources")]
    WeightLengthMismatch {
        user: UserId,
        expected: usize,
        got: usize,
    },
    #[error("user {user}: demand vector is all zero")]
    AllZeroDemand { user: UserId },
    #[error("user {user}: positive demand for resource {resource} whose capacity is zero")]
    InfeasibleDemand { user: UserId, resource: usize },
    #[error("user {user}: weight for resource {resource} is not positive")]
    NonPositiveWeight { user: UserId, resource: usize },
    #[error("user {user}: weighted mode requires a weight vector for every user")]
    MissingWeight { user: UserId },
    #[error("weights for resource {resource} sum to {sum}, expected 1")]
    UnnormalizedWeights { resource: usize, sum: Rational },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("demand vector is all zero")]
    AllZeroDemand,
    #[error("positive demand for resource {resource} whose capacity is zero")]
    ZeroCapacity { resource: usize },
    #[error("weight for resource {resource} is not positive")]
    NonPositiveWeight { resource: usize },
    #[error("empty user set")]
    EmptyUserSet,
    #[error("empty value set")]
    EmptyValueSet,
    #[error("values must be positive")]
    NonPositiveValue,
    #[error("normalized demand must have entries in [0, 1] with at least one entry equal to 1")]
    InvalidNormalizedDemand,
    #[error("{0} does not support per-user weights")]
    WeightsUnsupported(&'static str),
    #[error("allocations cover different user sets")]
    UserSetMismatch,
    #[error("invalid scenario: {}", format_issues(.0))]
    InvalidScenario(Vec<ValidationIssue>),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("numeric overflow in {0}")]
    Overflow(&'static str),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// All variants except `Io` describe bad input rather than a failed
    /// side effect. Callers mapping errors onto exit codes use this split.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
