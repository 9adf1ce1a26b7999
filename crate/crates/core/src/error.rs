use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("undefined lognorm: argument is zero")]
    UndefinedLognorm,
    #[error("dyadic subtraction would be negative")]
    NegativeDyadic,
    #[error("cannot coarsen exactly: target depth {target} is below current depth {current}")]
    CannotCoarsen { current: usize, target: usize },
    #[error("depth mismatch: {0}")]
    Depth(String),
    #[error("table size {got} does not match depth {depth} (expected {expected})")]
    TableSize {
        depth: usize,
        expected: usize,
        got: usize,
    },
    #[error("semimeasure inequality violated at node {0}")]
    NotSemimeasure(String),
    #[error("mixed-sign function is only defined against measures")]
    MixedSign,
    #[error("mixture weights sum to more than one")]
    WeightSum,
    #[error("enumeration length {requested} exceeds hard cap {cap}")]
    CapExceeded { requested: usize, cap: usize },
    #[error("invalid operator: {0}")]
    Operator(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("insufficient stage: have {have}, need {need}")]
    InsufficientStage { have: u32, need: u32 },
    #[error("parse error: {0}")]
    Parse(String),
}
