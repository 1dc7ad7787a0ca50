use thiserror::Error;

/// Errors raised by formula construction, parameter derivation and sampling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid formula: {0}")]
    InvalidFormula(String),

    #[error("condition violated: {inequality} ({lhs:.6e} vs {rhs:.6e})")]
    ConditionViolated {
        inequality: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("constraint {constraint} has no closed-form violation probability")]
    NotClosedForm { constraint: usize },

    #[error("budget exceeded: {what} (limit {limit})")]
    BudgetExceeded { what: &'static str, limit: u64 },

    #[error("component of variable {var} admits no solution")]
    InfeasibleComponent { var: usize },

    #[error("recursion path length exceeded {limit}")]
    RecursionGuard { limit: u64 },

    #[error("final assignment violates constraint {constraint}")]
    Unsatisfiable { constraint: usize },

    #[error("enumeration space {size} exceeds cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error("unknown variable {0}")]
    UnknownVariable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
