//! Seeded random executions and an activity-only adversarial scheduler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::IdConfig;
use crate::protocol::{PacketCap, ProtocolSpec};
use crate::trace::{ExecutionTrace, TraceStep};
use crate::unreliable::engine_id_steps;

/// `length` moments, each a uniformly chosen enabled step or a stutter when
/// nothing is enabled. The same seed always gives the same trace.
pub fn random_execution(
    spec: &ProtocolSpec,
    init: &IdConfig,
    seed: u64,
    length: usize,
    cap: PacketCap,
) -> ExecutionTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = ExecutionTrace::new(init.clone());
    for _ in 0..length {
        let steps = engine_id_steps(spec, trace.last(), cap);
        if steps.is_empty() {
            trace.push_stutter();
            continue;
        }
        let step = steps[rng.gen_range(0..steps.len())].clone();
        trace.push(TraceStep::Step { active: step.active }, step.post);
    }
    trace
}

/// A scheduler that ensures activity and nothing more: it stutters
/// `patience` times before every move, and when it must move it takes the
/// last changing step in canonical order. Stops in a configuration with no
/// changing step, closing the trace into a stutter lasso, or after
/// `max_moves` moves.
pub fn adversarial_execution(
    spec: &ProtocolSpec,
    init: &IdConfig,
    patience: usize,
    max_moves: usize,
    cap: PacketCap,
) -> ExecutionTrace {
    let mut trace = ExecutionTrace::new(init.clone());
    for _ in 0..max_moves {
        let here = trace.last().clone();
        let Some(step) = engine_id_steps(spec, &here, cap)
            .into_iter()
            .rfind(|s| s.post.project(spec) != here.project(spec))
        else {
            let start = trace.configs.len() - 1;
            trace.push_stutter();
            trace.lasso_start = Some(start);
            return trace;
        };
        for _ in 0..patience {
            trace.push_stutter();
        }
        trace.push(TraceStep::Step { active: step.active }, step.post);
    }
    trace
}
