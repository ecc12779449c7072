//! Constructive procedures and their independent checkers.

pub mod asynchronous;
pub mod careful;
pub mod shadow;
pub mod truncation;

pub use asynchronous::{
    abundance_set, in_degree, is_fully_asynchronous, AbundanceParams, AbundanceState, FullF, ThresholdF, ToyF,
};
pub use careful::{
    build_careful_execution, check_careful, two_agent_equivalence_check, CarefulExecution, CarefulOptions,
    TwoAgentReport, TwoAgentVerdict,
};
pub use shadow::{build_shadow_extension, check_shadow_extension, shadow_extension_exists, ShadowExtension, ShadowRun};
pub use truncation::{check_truncatable_at, find_truncation_constant, TruncationReport, TruncationViolation};
