//! Careful executions of a single agent, and the one-versus-two agent check
//! built on them.
//!
//! A message is expendable once it has been abundant in some configuration
//! of the execution so far. An execution is careful when no step that uses
//! up a non-expendable packet changes an agent state.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::config::{AgentId, IdConfig, MultiConfig, PacketId, StepInstance};
use crate::error::{Error, Result};
use crate::fairness::{fair_schedule, step_towards};
use crate::graph::{build_reach_graph, Edge, GraphLimits, ReachGraph};
use crate::protocol::{MessageId, PacketCap, ProtocolSpec};
use crate::step::{input_config, successors};
use crate::trace::{validate_trace, ExecutionTrace, TraceStep};
use crate::unreliable::engine_id_steps;
use crate::verify::{is_well_specified, VerifyOptions, WellSpecReport};

use super::asynchronous::{is_abundant_together, AbundanceParams, AbundanceState, ThresholdF};

#[derive(Clone, Copy)]
pub struct CarefulOptions<'f> {
    pub f: &'f dyn ThresholdF,
    pub packet_cap: PacketCap,
    /// Steps of the first two phases before giving up.
    pub max_steps: usize,
    pub max_nodes: usize,
}

impl<'f> CarefulOptions<'f> {
    pub fn new(f: &'f dyn ThresholdF, packet_cap: PacketCap) -> Self {
        CarefulOptions {
            f,
            packet_cap,
            max_steps: 10_000,
            max_nodes: GraphLimits::DEFAULT_MAX_NODES,
        }
    }

    fn limits(&self) -> GraphLimits {
        GraphLimits::new(self.packet_cap).with_max_nodes(self.max_nodes)
    }
}

/// The expendable set grew at `index`. `holds` records whether all
/// expendable messages together are abundant in that configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbundanceClaim {
    pub index: usize,
    pub added: BTreeSet<MessageId>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarefulExecution {
    /// Marked `phase1`, `phase2`, `target_moment`, `phase3` and `fair_tail`.
    pub trace: ExecutionTrace,
    pub phase2_start: usize,
    pub target_moment: usize,
    /// First configuration of the fair tail, a stable consensus.
    pub phase3_end: usize,
    pub value: bool,
    pub expendable: BTreeSet<MessageId>,
    pub claims: Vec<AbundanceClaim>,
    /// The packet cap stopped the first phase early.
    pub capped: bool,
}

/// Messages consumed and produced by an identified step.
fn packet_delta(step: &StepInstance) -> (Vec<MessageId>, Vec<MessageId>) {
    let consumed = step
        .pre
        .packets
        .iter()
        .filter(|(p, _)| !step.post.packets.contains_key(p))
        .map(|(_, m)| *m)
        .collect();
    let produced = step
        .post
        .packets
        .iter()
        .filter(|(p, _)| !step.pre.packets.contains_key(p))
        .map(|(_, m)| *m)
        .collect();
    (consumed, produced)
}

/// Engine steps from `c`, one per resulting anonymous configuration.
fn distinct_steps(spec: &ProtocolSpec, c: &IdConfig, cap: PacketCap) -> Vec<StepInstance> {
    let mut seen = BTreeSet::new();
    engine_id_steps(spec, c, cap)
        .into_iter()
        .filter(|s| seen.insert(s.post.project(spec)))
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Goal {
    /// End with a step that sends a non-expendable message.
    Create,
    /// End with a step that consumes a non-expendable packet and keeps the
    /// agent's state.
    Consume,
}

struct PathSearch<'a> {
    spec: &'a ProtocolSpec,
    cap: PacketCap,
    expendable: &'a BTreeSet<MessageId>,
    goal: Goal,
    best: Option<((usize, usize, bool), Vec<StepInstance>)>,
}

impl<'a> PathSearch<'a> {
    /// Loop-free in the agent's state, consuming expendable packets only,
    /// cheapest in expendable packets, then shortest, then ending without a
    /// state change.
    fn dfs(&mut self, cur: &IdConfig, visited: &mut BTreeSet<MultiConfig>, path: &mut Vec<StepInstance>, cost: usize) {
        for st in distinct_steps(self.spec, cur, self.cap) {
            let (consumed, produced) = packet_delta(&st);
            let rare_in = consumed.iter().any(|m| !self.expendable.contains(m));
            let rare_out = produced.iter().any(|m| !self.expendable.contains(m));
            let moves = st.pre.agents != st.post.agents;
            let cost = cost + consumed.iter().filter(|m| self.expendable.contains(m)).count();
            let done = match self.goal {
                Goal::Create => rare_out && !(rare_in && moves),
                Goal::Consume => rare_in && !moves,
            };
            if done {
                let key = (cost, path.len() + 1, moves);
                if self.best.as_ref().is_none_or(|(k, _)| key < *k) {
                    let mut p = path.clone();
                    p.push(st.clone());
                    self.best = Some((key, p));
                }
                continue;
            }
            let agents_after = MultiConfig::from_counts(st.post.project(self.spec).states, alloc::vec![]);
            if moves && !rare_in && !rare_out && !visited.contains(&agents_after) {
                visited.insert(agents_after.clone());
                path.push(st.clone());
                self.dfs(&st.post, visited, path, cost);
                path.pop();
                visited.remove(&agents_after);
            }
        }
    }
}

fn cheapest_path(
    spec: &ProtocolSpec,
    cur: &IdConfig,
    expendable: &BTreeSet<MessageId>,
    cap: PacketCap,
    goal: Goal,
) -> Option<Vec<StepInstance>> {
    let mut search = PathSearch {
        spec,
        cap,
        expendable,
        goal,
        best: None,
    };
    let mut visited = BTreeSet::new();
    visited.insert(MultiConfig::from_counts(cur.project(spec).states, alloc::vec![]));
    search.dfs(cur, &mut visited, &mut Vec::new(), 0);
    search.best.map(|(_, p)| p)
}

/// Whether a graph edge would break carefulness under `expendable`.
fn careless_edge(edge: &Edge, expendable: &BTreeSet<MessageId>) -> bool {
    edge.schema.consumed.iter().any(|m| !expendable.contains(m)) && edge.schema.changes_states()
}

/// Fewest consumed packets from `root` to a stable consensus the cap does
/// not reach, careful steps only.
fn cheapest_to_stable(g: &ReachGraph, root: usize, expendable: &BTreeSet<MessageId>) -> Option<Vec<usize>> {
    let mut dist: Vec<Option<usize>> = alloc::vec![None; g.len()];
    let mut parent: Vec<Option<usize>> = alloc::vec![None; g.len()];
    let mut heap = BinaryHeap::new();
    dist[root] = Some(0);
    heap.push(Reverse((0usize, root)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u] != Some(d) {
            continue;
        }
        if g.cap_free_stable_value(u).is_some() {
            let mut path = alloc::vec![u];
            let mut cur = u;
            while let Some(p) = parent[cur] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for edge in g.out_edges(u) {
            if careless_edge(edge, expendable) {
                continue;
            }
            let nd = d + edge.schema.consumed.len();
            if dist[edge.to].is_none_or(|old| nd < old) {
                dist[edge.to] = Some(nd);
                parent[edge.to] = Some(u);
                heap.push(Reverse((nd, edge.to)));
            }
        }
    }
    None
}

fn check_preconditions(spec: &ProtocolSpec) -> Result<AbundanceParams> {
    if !spec.unreliable {
        return Err(Error::Precondition(
            "careful executions need an unreliable protocol".into(),
        ));
    }
    if spec.sigma.len() != 1 {
        return Err(Error::Precondition(format!(
            "careful executions need a single input symbol, found {}",
            spec.sigma.len()
        )));
    }
    AbundanceParams::of(spec)
}

/// Builds a careful fair execution from one agent in the input state.
///
/// Phase 1 sends non-expendable messages while possible, each time along the
/// path that uses the fewest expendable packets. Phase 2 walks to states
/// that can receive leftover non-expendable packets and drops them without
/// updating. Phase 3 heads for the nearest stable consensus, after which the
/// fair schedule takes over.
pub fn build_careful_execution(spec: &ProtocolSpec, opts: CarefulOptions<'_>) -> Result<CarefulExecution> {
    let params = check_preconditions(spec)?;
    let cap = opts.packet_cap;
    let init = IdConfig::from_multi(&input_config(spec, &[1])?);
    let mut abundance = AbundanceState::new(params, opts.f)?;
    abundance.observe(&init.project(spec))?;
    let mut trace = ExecutionTrace::new(init);
    let mut claims = Vec::new();
    let mut capped = false;

    for goal in [Goal::Create, Goal::Consume] {
        trace.mark(match goal {
            Goal::Create => "phase1",
            Goal::Consume => "phase2",
        });
        loop {
            if trace.len() >= opts.max_steps {
                return Err(Error::StepBudget { limit: opts.max_steps });
            }
            let Some(path) = cheapest_path(spec, trace.last(), &abundance.expendable, cap, goal) else {
                if goal == Goal::Create {
                    capped = successors(spec, &trace.last().project(spec), cap).capped;
                }
                break;
            };
            for st in path {
                let post = st.post.project(spec);
                trace.push(TraceStep::Step { active: st.active }, st.post);
                let added = abundance.observe(&post)?;
                if !added.is_empty() {
                    claims.push(AbundanceClaim {
                        index: trace.configs.len() - 1,
                        added,
                        holds: is_abundant_together(&post, &abundance.expendable, params, opts.f),
                    });
                }
            }
        }
    }
    let phase2_start = trace.marks[1].0;
    let target_moment = trace.configs.len() - 1;
    trace.mark("target_moment");
    trace.mark("phase3");

    let g = build_reach_graph(spec, &trace.last().project(spec), opts.limits())?;
    let path = cheapest_to_stable(&g, 0, &abundance.expendable).ok_or_else(|| Error::CapTooSmall {
        cap: format!("{cap}"),
        reason: "no stable consensus clear of the cap is reachable by careful steps".into(),
    })?;
    for &v in &path[1..] {
        step_towards(spec, &mut trace, g.node(v), cap)?;
        abundance.observe(g.node(v))?;
    }
    let end = *path.last().expect("nonempty path");
    let value = g.cap_free_stable_value(end).expect("target is a stable consensus");
    let phase3_end = trace.configs.len() - 1;
    trace.mark("fair_tail");
    let tail = fair_schedule(spec, trace.last(), opts.limits())?;
    trace.append(&tail);

    Ok(CarefulExecution {
        trace,
        phase2_start,
        target_moment,
        phase3_end,
        value,
        expendable: abundance.expendable,
        claims,
        capped,
    })
}

/// Index of the first careless step, recomputing expendable messages from
/// the prefix. `None` means the trace is careful.
pub fn check_careful(
    spec: &ProtocolSpec,
    trace: &ExecutionTrace,
    f: &dyn ThresholdF,
    cap: PacketCap,
) -> Result<Option<usize>> {
    validate_trace(spec, trace, cap)?;
    let mut abundance = AbundanceState::new(AbundanceParams::of(spec)?, f)?;
    let mut pre = trace.configs[0].project(spec);
    abundance.observe(&pre)?;
    for (k, c) in trace.configs[1..].iter().enumerate() {
        let post = c.project(spec);
        let rare_used = spec
            .message_ids()
            .any(|m| !abundance.is_expendable(m) && post.supply(m) < pre.supply(m));
        if rare_used && trace.configs[k].agents != c.agents {
            return Ok(Some(k));
        }
        abundance.observe(&post)?;
        pre = post;
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwoAgentVerdict {
    SameValue(bool),
    NotWellSpecified,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoAgentReport {
    pub verdict: TwoAgentVerdict,
    pub careful: CarefulExecution,
    /// Two interleaved copies of the careful execution up to its stable
    /// consensus, marked at the joint target moment.
    pub joint: ExecutionTrace,
    /// Stable consensus value of the last joint configuration, if any.
    pub joint_value: Option<bool>,
    pub checked: WellSpecReport,
}

/// Replays single-agent steps as steps of `agent` in the joint execution,
/// giving its packets fresh ids.
struct Replay<'a> {
    src: &'a ExecutionTrace,
    agent: AgentId,
    packets: BTreeMap<PacketId, PacketId>,
}

impl<'a> Replay<'a> {
    fn run(&mut self, joint: &mut ExecutionTrace, range: core::ops::Range<usize>) {
        for i in range {
            if self.src.steps[i] == TraceStep::Stutter {
                continue;
            }
            let (pre, post) = (&self.src.configs[i], &self.src.configs[i + 1]);
            let before = joint.last().clone();
            let mut next = before.with_agent(self.agent, post.agents[&AgentId(0)]);
            for p in pre.packets.keys().filter(|p| !post.packets.contains_key(p)) {
                let mapped = self.packets.remove(p).expect("replayed packet exists");
                next.packets.remove(&mapped);
            }
            let produced: Vec<(PacketId, MessageId)> = post
                .packets
                .iter()
                .filter(|(p, _)| !pre.packets.contains_key(p))
                .map(|(p, m)| (*p, *m))
                .collect();
            for ((p, m), fresh) in produced.iter().zip(before.fresh_packets(produced.len())) {
                next.packets.insert(fresh, *m);
                self.packets.insert(*p, fresh);
            }
            joint.push(
                TraceStep::Step {
                    active: [self.agent].into_iter().collect(),
                },
                next,
            );
        }
    }
}

fn describe(v: Option<bool>) -> String {
    match v {
        Some(b) => format!("{b}"),
        None => "no stable consensus".into(),
    }
}

/// Runs the careful execution for one agent, interleaves two copies of it
/// into a two-agent execution and reads off the value both reach. The
/// answer is cross-checked with the model checker on one and two agents; a
/// disagreement is reported as [`Error::VerdictMismatch`].
pub fn two_agent_equivalence_check(spec: &ProtocolSpec, opts: CarefulOptions<'_>) -> Result<TwoAgentReport> {
    let careful = build_careful_execution(spec, opts)?;
    let two = IdConfig::from_multi(&input_config(spec, &[2])?);
    let mut joint = ExecutionTrace::new(two);
    let mut first = Replay {
        src: &careful.trace,
        agent: AgentId(0),
        packets: careful.trace.configs[0].packets.keys().map(|p| (*p, *p)).collect(),
    };
    let mut second = Replay {
        src: &careful.trace,
        agent: AgentId(1),
        packets: BTreeMap::new(),
    };
    first.run(&mut joint, 0..careful.target_moment);
    second.run(&mut joint, 0..careful.target_moment);
    joint.mark("target_moment");
    first.run(&mut joint, careful.target_moment..careful.phase3_end);
    second.run(&mut joint, careful.target_moment..careful.phase3_end);
    validate_trace(spec, &joint, PacketCap::Unbounded)?;

    let last = joint.last().project(spec);
    let room = match opts.packet_cap {
        PacketCap::Finite(c) => PacketCap::Finite(c + last.packets()),
        PacketCap::Unbounded => PacketCap::Unbounded,
    };
    let g = build_reach_graph(spec, &last, GraphLimits::new(room).with_max_nodes(opts.max_nodes))?;
    let joint_value = g.cap_free_stable_value(0);
    let constructive = (joint_value == Some(careful.value)).then_some(careful.value);

    let mut vopts = VerifyOptions::new(2, opts.packet_cap);
    vopts.max_nodes = opts.max_nodes;
    let checked = is_well_specified(spec, vopts)?;
    let verdict = if !checked.well_specified() {
        TwoAgentVerdict::NotWellSpecified
    } else {
        let one = checked.table.entries.get(&alloc::vec![1]).copied();
        let two = checked.table.entries.get(&alloc::vec![2]).copied();
        match (constructive, one, two) {
            (Some(b), Some(x), Some(y)) if b == x && b == y => TwoAgentVerdict::SameValue(b),
            _ => {
                return Err(Error::VerdictMismatch {
                    constructive: format!(
                        "one agent reaches {}, two agents reach {}",
                        careful.value,
                        describe(joint_value)
                    ),
                    checked: format!(
                        "one agent settles on {}, two agents on {}",
                        describe(one),
                        describe(two)
                    ),
                })
            }
        }
    };
    Ok(TwoAgentReport {
        verdict,
        careful,
        joint,
        joint_value,
        checked,
    })
}
