//! Error types shared across the simulator.

use crate::event::ThreadId;
use crate::time::TimeNs;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("event due {due} is in the past (now {now})")]
    PastDue { due: TimeNs, now: TimeNs },

    #[error(transparent)]
    Sched(#[from] SchedError),

    #[error("simulation invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SchedError {
    #[error("invalid scheduling parameters: {0}")]
    InvalidParams(String),

    #[error("thread {0:?} is in the wrong state for this transition: {1}")]
    InvalidState(ThreadId, &'static str),

    #[error("budget underflow on thread {0:?}: internal accounting bug")]
    BudgetUnderflow(ThreadId),
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("duplicate topic `{0}`")]
    DuplicateTopic(String),

    #[error(transparent)]
    Sched(#[from] SchedError),
}

impl ScenarioError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.to_owned(),
            reason: reason.into(),
        }
    }
}
