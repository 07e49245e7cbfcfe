use thiserror::Error;

use crate::model::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid tree structure: {0}")]
    InvalidTree(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{0}` is not a placement candidate (leaf)")]
    NotALeaf(String),

    #[error("node `{0}` appears more than once in the placement")]
    DuplicateLeaf(String),

    #[error("replica count {rho} out of range (0..={max})")]
    ReplicasOutOfRange { rho: usize, max: usize },

    #[error("brute force needs {combinations} combinations, budget is {budget}")]
    BudgetExceeded { combinations: u128, budget: u64 },

    #[error("index {index} exceeds aggregate capacity {capacity}")]
    IndexOutOfRange { index: usize, capacity: usize },

    #[error("aggregate has non-zero entries above index {target}")]
    CapacityExceeded { target: usize },

    #[error("node `{to}` is not a descendant of `{from}`")]
    NotDescendant { from: String, to: String },

    #[error("max_children must be positive when generating more than one node")]
    ZeroArity,

    #[error("malformed aggregate text: {0}")]
    MalformedAggregate(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}
