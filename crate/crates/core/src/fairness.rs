//! Default fairness on finite reachability graphs.
//!
//! An infinite execution is fair when every configuration that stays
//! reachable is visited infinitely often. For a lasso this means the cycle
//! must contain every configuration reachable from it, which is decided on
//! anonymous configurations.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::config::{IdConfig, MultiConfig};
use crate::error::{Error, Result};
use crate::graph::{build_reach_graph, build_reach_graph_from, GraphLimits, ReachGraph};
use crate::protocol::{PacketCap, ProtocolSpec};
use crate::trace::{validate_trace, ExecutionTrace, TraceStep};
use crate::unreliable::engine_id_steps;

/// Laps around a cycle before giving up on closing it at the identified level.
const MAX_LAPS: usize = 10_000;

/// Extends `trace` by one identified step whose projection is `target`.
pub(crate) fn step_towards(
    spec: &ProtocolSpec,
    trace: &mut ExecutionTrace,
    target: &MultiConfig,
    cap: PacketCap,
) -> Result<()> {
    let pre = trace.last().clone();
    if &pre.project(spec) == target {
        trace.push_stutter();
        return Ok(());
    }
    let step = engine_id_steps(spec, &pre, cap)
        .into_iter()
        .find(|s| &s.post.project(spec) == target)
        .ok_or_else(|| Error::InvalidTrace {
            index: trace.len(),
            reason: "graph edge has no identified counterpart".into(),
        })?;
    trace.push(TraceStep::Step { active: step.active }, step.post);
    Ok(())
}

/// Closed walk from `entry` through every member of its (terminal) SCC.
fn closed_walk(g: &ReachGraph, entry: usize) -> Vec<usize> {
    let scc = g.scc_of(entry);
    let mut walk = alloc::vec![entry];
    let mut cur = entry;
    for &m in g.scc_members(scc) {
        if walk.contains(&m) {
            continue;
        }
        let path = g.shortest_path(cur, m).expect("strongly connected");
        walk.extend_from_slice(&path[1..]);
        cur = m;
    }
    if cur != entry {
        let back = g.shortest_path(cur, entry).expect("strongly connected");
        walk.extend_from_slice(&back[1..]);
    }
    walk
}

/// Follows the graph path `path` from `init`, then loops around the SCC of
/// its last node until the identified configuration repeats. A single
/// configuration SCC loops by stuttering.
pub(crate) fn lasso_along(
    spec: &ProtocolSpec,
    g: &ReachGraph,
    init: &IdConfig,
    path: &[usize],
    cap: PacketCap,
) -> Result<ExecutionTrace> {
    let mut trace = ExecutionTrace::new(init.clone());
    for &v in &path[1..] {
        step_towards(spec, &mut trace, g.node(v), cap)?;
    }
    let entry = *path.last().expect("nonempty path");
    let walk = closed_walk(g, entry);
    if walk.len() == 1 {
        let start = trace.configs.len() - 1;
        trace.push_stutter();
        trace.lasso_start = Some(start);
        return Ok(trace);
    }
    let mut lap_starts: Vec<(IdConfig, usize)> = Vec::new();
    for _ in 0..MAX_LAPS {
        let here = trace.last().clone();
        if let Some((_, j)) = lap_starts.iter().find(|(c, _)| *c == here) {
            trace.lasso_start = Some(*j);
            return Ok(trace);
        }
        lap_starts.push((here, trace.configs.len() - 1));
        for &v in &walk[1..] {
            step_towards(spec, &mut trace, g.node(v), cap)?;
        }
    }
    Err(Error::StepBudget { limit: MAX_LAPS })
}

/// A fair lasso from `init`: the first terminal SCC in discovery order is
/// entered along a shortest path and then toured forever. SCCs that are
/// terminal only because of the packet cap come last.
pub fn fair_schedule(spec: &ProtocolSpec, init: &IdConfig, limits: GraphLimits) -> Result<ExecutionTrace> {
    let g = build_reach_graph(spec, &init.project(spec), limits)?;
    fair_schedule_in(spec, &g, init, limits.packet_cap)
}

/// [`fair_schedule`] on a graph that already contains `init`.
pub fn fair_schedule_in(
    spec: &ProtocolSpec,
    g: &ReachGraph,
    init: &IdConfig,
    cap: PacketCap,
) -> Result<ExecutionTrace> {
    let root = g
        .node_id(&init.project(spec))
        .ok_or_else(|| Error::Precondition("initial configuration is not in the graph".into()))?;
    let sccs = g.terminal_sccs_from(root);
    let scc = sccs.iter().copied().find(|s| !g.is_cap_artifact(*s)).unwrap_or(sccs[0]);
    let entry = g.scc_members(scc)[0];
    let path = g.shortest_path(root, entry).expect("terminal SCC is reachable");
    lasso_along(spec, g, init, &path, cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FairnessVerdict {
    pub fair: bool,
    /// The exploration behind the verdict suppressed packet-creating steps.
    pub capped: bool,
}

/// Decides default fairness of a lasso: it is fair iff every configuration
/// reachable from the cycle occurs in the cycle.
pub fn check_fairness(spec: &ProtocolSpec, trace: &ExecutionTrace, limits: GraphLimits) -> Result<FairnessVerdict> {
    validate_trace(spec, trace, limits.packet_cap)?;
    let Some(cycle) = trace.cycle() else {
        return Err(Error::InvalidTrace {
            index: trace.configs.len() - 1,
            reason: "not a lasso".into(),
        });
    };
    let on_cycle: BTreeSet<MultiConfig> = trace.configs[cycle].iter().map(|c| c.project(spec)).collect();
    let roots: Vec<MultiConfig> = on_cycle.iter().cloned().collect();
    let g = build_reach_graph_from(spec, &roots, limits)?;
    Ok(FairnessVerdict {
        fair: g.nodes().iter().all(|c| on_cycle.contains(c)),
        capped: g.capped(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AgentId;
    use crate::corpus;
    use crate::protocol::StateId;

    fn id(states: &[u32], messages: &[u32]) -> IdConfig {
        IdConfig::from_multi(&MultiConfig::from_counts(states.to_vec(), messages.to_vec()))
    }

    fn limits() -> GraphLimits {
        GraphLimits::new(PacketCap::Finite(3))
    }

    #[test]
    fn pp_pair_schedule() {
        let spec = corpus::eq_pp();
        let t = fair_schedule(&spec, &id(&[1, 1, 0], &[]), limits()).unwrap();
        assert_eq!(t.configs.len(), 3);
        assert_eq!(t.steps[1], TraceStep::Stutter);
        assert_eq!(t.lasso_start, Some(1));
        assert_eq!(
            t.last().project(&spec),
            MultiConfig::from_counts(alloc::vec![0, 0, 2], alloc::vec![])
        );
        assert!(check_fairness(&spec, &t, limits()).unwrap().fair);
    }

    #[test]
    fn dead_single_agent() {
        let spec = corpus::builtin("threshold(2)").unwrap().spec;
        let t = fair_schedule(&spec, &id(&[1, 0], &[]), limits()).unwrap();
        assert_eq!(t.steps, alloc::vec![TraceStep::Stutter]);
        assert!(check_fairness(&spec, &t, limits()).unwrap().fair);
    }

    #[test]
    fn unreliable_pp_ends_in_bottom() {
        let spec = corpus::eq_pp().with_unreliable(true);
        let t = fair_schedule(&spec, &id(&[1, 1, 0], &[]), limits()).unwrap();
        let last = t.last();
        assert!(last.agents.values().all(|q| *q == StateId(2)));
        assert!(check_fairness(&spec, &t, limits()).unwrap().fair);
    }

    #[test]
    fn stuttering_before_a_reachable_sink_is_unfair() {
        let spec = corpus::eq_pp();
        let mut t = ExecutionTrace::new(id(&[1, 1, 0], &[]));
        t.push_stutter();
        t.lasso_start = Some(0);
        assert!(!check_fairness(&spec, &t, limits()).unwrap().fair);
    }

    #[test]
    fn finite_trace_is_not_a_lasso() {
        let spec = corpus::eq_pp();
        let t = ExecutionTrace::new(id(&[1, 0, 0], &[]));
        assert!(matches!(
            check_fairness(&spec, &t, limits()),
            Err(Error::InvalidTrace { .. })
        ));
    }

    #[test]
    fn queued_cycle_closes() {
        // With a cap the queued protocol keeps sending and receiving forever.
        let spec = corpus::eq_qt();
        let t = fair_schedule(&spec, &id(&[2, 0, 0], &[]), limits()).unwrap();
        assert!(t.cycle().unwrap().len() > 1);
        let v = check_fairness(&spec, &t, limits()).unwrap();
        assert!(v.fair && v.capped);
        assert!(t
            .configs
            .iter()
            .all(|c| c.agents.keys().eq([AgentId(0), AgentId(1)].iter())));
    }
}
