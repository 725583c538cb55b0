use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("tail sum from t = {t} did not converge within {cap} terms")]
    ConvergenceNotReached { t: u64, cap: u64 },

    #[error("condition violated: {0}")]
    ConditionViolated(String),

    #[error("discount sequence is not geometrically concave (first failure at t = {t})")]
    NotConcave { t: u64 },

    #[error("phase index {l} overflows the 64-bit exponent budget")]
    Overflow { l: u32 },

    #[error("horizon {horizon} exceeds the brute-force cap {cap}")]
    HorizonTooLarge { horizon: usize, cap: usize },

    #[error("memo table exceeded its budget of {cap} keys")]
    MemoryBudgetExceeded { cap: usize },

    #[error("no double-decrease path found within depth {depth}")]
    NoDoubleDecrease { depth: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl LabError {
    /// Stable kebab-case name of the variant, used in CSV error cells.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::ConvergenceNotReached { .. } => "convergence-not-reached",
            LabError::ConditionViolated(_) => "condition-violated",
            LabError::NotConcave { .. } => "not-concave",
            LabError::Overflow { .. } => "overflow",
            LabError::HorizonTooLarge { .. } => "horizon-too-large",
            LabError::MemoryBudgetExceeded { .. } => "memory-budget-exceeded",
            LabError::NoDoubleDecrease { .. } => "no-double-decrease",
            LabError::PreconditionViolated(_) => "precondition-violated",
            LabError::InvalidParameter(_) => "invalid-parameter",
        }
    }
}
