use thiserror::Error;

/// Errors shared by the mechanism, valuation, welfare, and equilibrium modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid bid for agent {agent}, entry {index}: {value}")]
    InvalidBid {
        agent: usize,
        index: usize,
        value: f64,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("instance is not in {expected} mode")]
    ModeMismatch { expected: &'static str },

    #[error("allocation undefined for agent {agent}: every constraint coefficient is zero")]
    AllocationUndefined { agent: usize },

    #[error("coordinate {index} = {value} lies outside [0, 1]")]
    CoordinateOutOfRange { index: usize, value: f64 },

    #[error("invalid valuation: {0}")]
    InvalidValuation(String),

    #[error("budgets required but not present on the instance")]
    MissingBudgets,

    #[error("infeasible allocation: {0}")]
    InfeasibleAllocation(String),

    #[error("enumeration budget exceeded: {0}")]
    EnumerationGuard(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("too few Monte Carlo samples: {got} (need at least {min})")]
    TooFewSamples { got: usize, min: usize },

    #[error("action guard exceeded: agent {agent} has {actions} grid actions (limit {limit})")]
    ActionGuard {
        agent: usize,
        actions: usize,
        limit: usize,
    },

    #[error("no budget-feasible bid on the deviation grid for agent {agent}")]
    BudgetInfeasibleGrid { agent: usize },

    #[error("subset guard exceeded: {m} resources (limit {limit})")]
    SubsetGuard { m: usize, limit: usize },
}
