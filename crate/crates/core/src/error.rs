use thiserror::Error;

/// Errors produced by dictionary construction and the pursuit strategies.
#[derive(Debug, Error)]
pub enum PursuitError {
    #[error("invalid dictionary spec: {0}")]
    InvalidSpec(String),

    #[error("atom index {index} out of range 1..={count}")]
    AtomIndexOutOfRange { index: usize, count: usize },

    #[error("vector length {got} does not match expected length {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operation requires dictionary kind {expected}, got {got}")]
    WrongKind {
        expected: &'static str,
        got: &'static str,
    },

    /// The candidate atom lies numerically within the span of the atoms
    /// already selected for the block.
    #[error("candidate atom is numerically within the selected span")]
    DegenerateAtom,

    /// No atom of the block's dictionary can still reduce its residual.
    #[error("block has no selectable atom left")]
    BlockExhausted,

    #[error("budget infeasible: placed {placed} of {budget} atoms before all blocks exhausted")]
    BudgetInfeasible { placed: usize, budget: usize },

    #[error("position {position} out of range 1..={len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("downgrade budget {requested} exceeds the current total of {current} atoms")]
    BudgetExceedsCurrent { requested: usize, current: usize },

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("signal has zero energy")]
    ZeroEnergySignal,
}

pub type Result<T> = std::result::Result<T, PursuitError>;
