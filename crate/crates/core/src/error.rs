use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContestError {
    #[error("InvalidMarket: {0}")]
    InvalidMarket(String),
    #[error("NonMonotoneReward: rewards must satisfy R1 >= R2 >= ... >= Rn >= 0 (violated at rank {rank})")]
    NonMonotoneReward { rank: usize },
    #[error("DegenerateReward: R1 must be strictly larger than Rn")]
    DegenerateReward,
    #[error("DriftTooLarge: drift {mu} is not below the bound {mu_bar}")]
    DriftTooLarge { mu: f64, mu_bar: f64 },
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("OutOfRange: {0}")]
    OutOfRange(String),
    #[error("InvalidDistribution: {0}")]
    InvalidDistribution(String),
    #[error("IdenticalSchemes: both equilibria come from the same reward scheme")]
    IdenticalSchemes,
    #[error("NoFeasibleScheme: every candidate cut-off violates the drift bound")]
    NoFeasibleScheme,
    #[error("NotConverged: {0}")]
    NotConverged(String),
    #[error("StepTooCoarse: {0}")]
    StepTooCoarse(String),
    #[error("Overflow: n = {n} exceeds the float cap {cap}")]
    Overflow { n: usize, cap: usize },
}

impl ContestError {
    /// Stable variant name, used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            ContestError::InvalidMarket(_) => "InvalidMarket",
            ContestError::NonMonotoneReward { .. } => "NonMonotoneReward",
            ContestError::DegenerateReward => "DegenerateReward",
            ContestError::DriftTooLarge { .. } => "DriftTooLarge",
            ContestError::DimensionMismatch { .. } => "DimensionMismatch",
            ContestError::OutOfRange(_) => "OutOfRange",
            ContestError::InvalidDistribution(_) => "InvalidDistribution",
            ContestError::IdenticalSchemes => "IdenticalSchemes",
            ContestError::NoFeasibleScheme => "NoFeasibleScheme",
            ContestError::NotConverged(_) => "NotConverged",
            ContestError::StepTooCoarse(_) => "StepTooCoarse",
            ContestError::Overflow { .. } => "Overflow",
        }
    }
}

pub type Result<T> = std::result::Result<T, ContestError>;
