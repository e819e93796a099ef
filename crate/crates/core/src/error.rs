use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown machine `{0}`")]
    UnknownMachine(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("empty action set")]
    EmptyActions,
    #[error("empty machine set")]
    EmptyMachineSet,
    #[error("partial assignment: machine `{machine}` has no entry for state {state}, type {ty}")]
    PartialAssignment {
        machine: String,
        state: usize,
        ty: usize,
    },
    #[error("missing table entry for state {state}, type {ty}")]
    MissingEntry { state: usize, ty: usize },
    #[error("conditioning on null event")]
    NullEvent,
    #[error("prior mass {0} ≠ 1")]
    PriorMass(String),
    #[error("negative prior mass {mass} at state {state}, type {ty}")]
    NegativeMass {
        state: usize,
        ty: usize,
        mass: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("machine `{0}` is not cell-aware")]
    NotCellAware(String),
    #[error("machine output {value} is not an action index (have {actions} actions)")]
    InvalidAction { value: i64, actions: usize },
    #[error("program error at line {line}: {msg}")]
    Program { line: usize, msg: String },
    #[error("off-tree history")]
    OffTree,
    #[error("insufficient random prefix")]
    InsufficientRandomPrefix,
    #[error("conversation exceeded round bound {0}")]
    RoundBound(usize),
    #[error("machine did not halt within its fuel ({0} steps)")]
    NonHalting(u64),
    #[error("reply `{0}` is outside the informant alphabet")]
    Alphabet(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid speedup function: {0}")]
    InvalidSpeedup(String),
    #[error("outside the zero-knowledge problem class: {0}")]
    OutsideFamily(String),
    #[error("view-shape mismatch: {0}")]
    ViewShape(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
