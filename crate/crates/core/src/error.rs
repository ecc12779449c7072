use alloc::string::String;

use crate::predicate::ParseError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("node budget of {limit} exceeded after exploring {explored} configurations ({frontier} still queued)")]
    NodeBudget {
        limit: usize,
        explored: usize,
        frontier: usize,
    },
    #[error("step budget of {limit} exceeded")]
    StepBudget { limit: usize },
    #[error("packet cap {cap} too small: {reason}")]
    CapTooSmall { cap: String, reason: String },
    #[error("protocol `{0}` can create packets, a finite packet cap is required")]
    UnboundedPackets(String),
    #[error("unknown protocol kind `{0}`")]
    UnknownKind(String),
    #[error("unknown built-in protocol `{0}`")]
    UnknownBuiltin(String),
    #[error("input multiset is empty")]
    EmptyInput,
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("step does not conserve agents")]
    AgentConservation,
    #[error("invalid trace at index {index}: {reason}")]
    InvalidTrace { index: usize, reason: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("threshold function increases between k={k} and k={next}", next = k + 1)]
    NonMonotoneThreshold { k: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("constructive verdict ({constructive}) disagrees with the model checker ({checked})")]
    VerdictMismatch { constructive: String, checked: String },
}

impl Error {
    /// Budget exhaustion, as opposed to a usage or semantic failure.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            Error::NodeBudget { .. } | Error::StepBudget { .. } | Error::CapTooSmall { .. }
        )
    }
}
