use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 2")]
    InvalidDimension(usize),

    #[error("digit {value} out of range for dimension {dim}")]
    InvalidDigit { value: usize, dim: usize },

    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid attack: {0}")]
    InvalidAttack(String),

    #[error("protocol desync: {0}")]
    ProtocolDesync(String),

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    #[error("no closed-form detection probability for the {0} model")]
    NoClosedForm(&'static str),

    #[error("transcript belongs to an incomplete (aborted) run")]
    IncompleteRun,

    #[error("enumeration needs {needed} steps, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("invalid coalition: {0}")]
    InvalidCoalition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("outcome {outcome} has zero probability")]
    ImpossibleOutcome { outcome: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
