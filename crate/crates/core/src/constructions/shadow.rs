//! Shadow extensions: a copy `a'` of an agent `a` that can always be in the
//! state `a` is in, in at least one execution of a family.
//!
//! The builder follows a fair continuation step by step. A step whose
//! targets are all reachable by the shadows is copied. Otherwise the agents
//! that would move somewhere new fail to update, a shadow takes their update
//! instead, and the fair continuation is recomputed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{AgentId, IdConfig, StepInstance};
use crate::error::{Error, Result};
use crate::fairness::fair_schedule;
use crate::graph::{build_reach_graph, GraphLimits};
use crate::protocol::{PacketCap, ProtocolSpec, StateId};
use crate::trace::{validate_trace, ExecutionTrace, TraceStep};
use crate::unreliable::{engine_id_steps, is_engine_step};

/// Steps of the base execution, after which the builder gives up.
pub const DEFAULT_MAX_STEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowExtension {
    pub base: ExecutionTrace,
    pub agent: AgentId,
    pub shadow_agent: AgentId,
    pub shadows: Vec<ExecutionTrace>,
    /// States of `shadow_agent` over all shadows, per configuration index.
    pub reachable: Vec<BTreeSet<StateId>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowRun {
    /// Fair lasso shared by every extension.
    pub base: ExecutionTrace,
    pub extensions: BTreeMap<AgentId, ShadowExtension>,
    /// How often the fair continuation was recomputed.
    pub replacements: usize,
    /// Base indices where a step of the continuation was weakened, with that
    /// step.
    pub adjusted: Vec<(usize, StepInstance)>,
}

struct Family {
    agent: AgentId,
    shadows: Vec<ExecutionTrace>,
    reachable: Vec<BTreeSet<StateId>>,
}

impl Family {
    fn shadow_state(t: &ExecutionTrace, shadow: AgentId, k: usize) -> StateId {
        t.configs[k].state_of(shadow).expect("shadow agent present")
    }

    fn reachable_now(&self) -> &BTreeSet<StateId> {
        self.reachable.last().expect("initial reachable set")
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Case {
    Copy,
    FreezePassive,
    FreezeAll,
}

/// Builds a fair lasso from `init` with a shadow extension around every agent.
/// The protocol must be unreliable.
pub fn build_shadow_extension(
    spec: &ProtocolSpec,
    init: &IdConfig,
    limits: GraphLimits,
    max_steps: usize,
) -> Result<ShadowRun> {
    if !spec.unreliable {
        return Err(Error::Precondition(
            "shadow extensions are built for unreliable protocols".into(),
        ));
    }
    let cap = limits.packet_cap;
    let shadow = init.fresh_agent();
    let mut base = ExecutionTrace::new(init.clone());
    let mut families: Vec<Family> = init
        .agents
        .iter()
        .map(|(a, q)| Family {
            agent: *a,
            shadows: alloc::vec![ExecutionTrace::new(init.with_agent(shadow, *q))],
            reachable: alloc::vec![[*q].into_iter().collect()],
        })
        .collect();
    let bound = init.agents.len() * spec.num_states();
    let mut replacements = 0;
    let mut adjusted = Vec::new();

    let mut fair = fair_schedule(spec, init, limits)?;
    let mut pos = 0;
    let mut cycle_entry: Option<usize> = None;
    loop {
        if base.len() >= max_steps {
            return Err(Error::StepBudget { limit: max_steps });
        }
        let lasso = fair.lasso_start.expect("fair schedules are lassos");
        if pos == lasso && cycle_entry.is_none() {
            cycle_entry = Some(base.configs.len() - 1);
        }
        if pos == fair.configs.len() - 1 {
            if let Some(j) = cycle_entry {
                base.lasso_start = Some(j);
                for f in &mut families {
                    for t in &mut f.shadows {
                        t.lasso_start = Some(j);
                    }
                }
                break;
            }
            pos = lasso;
        }
        let k = base.configs.len() - 1;
        let cur = base.last().clone();
        let step = fair.steps[pos].clone();
        let next = fair.configs[pos + 1].clone();
        pos += 1;

        let TraceStep::Step { active } = &step else {
            base.push_stutter();
            for f in &mut families {
                for t in &mut f.shadows {
                    t.push_stutter();
                }
                let r = f.reachable_now().clone();
                f.reachable.push(r);
            }
            continue;
        };

        let unreachable = |f: &Family| {
            next.agents[&f.agent] != cur.agents[&f.agent] && !f.reachable_now().contains(&next.agents[&f.agent])
        };
        let case = if families.iter().any(|f| active.contains(&f.agent) && unreachable(f)) {
            Case::FreezeAll
        } else if families.iter().any(|f| !active.contains(&f.agent) && unreachable(f)) {
            Case::FreezePassive
        } else {
            Case::Copy
        };

        let mut post = next.clone();
        match case {
            Case::Copy => {}
            Case::FreezePassive => {
                for (a, q) in &cur.agents {
                    if !active.contains(a) {
                        post.agents.insert(*a, *q);
                    }
                }
            }
            Case::FreezeAll => post.agents = cur.agents.clone(),
        }
        if case != Case::Copy {
            if !is_engine_step(spec, &cur, active, &post, cap) {
                return Err(Error::InvalidTrace {
                    index: k,
                    reason: "weakened step is not a step of the protocol".into(),
                });
            }
            adjusted.push((
                k,
                StepInstance {
                    pre: cur.clone(),
                    active: active.clone(),
                    post: next.clone(),
                },
            ));
        }

        for f in &mut families {
            let a = f.agent;
            let is_active = active.contains(&a);
            let forks_here = match case {
                Case::Copy => false,
                Case::FreezePassive => !is_active && unreachable(f),
                Case::FreezeAll => is_active && unreachable(f),
            };
            let mut forks = Vec::new();
            if forks_here {
                let target = next.agents[&a];
                let src = f
                    .shadows
                    .iter()
                    .find(|t| Family::shadow_state(t, shadow, k) == cur.agents[&a])
                    .expect("some shadow coincides with the agent");
                let mut fork = src.clone();
                let fork_active = if is_active {
                    let mut s = active.clone();
                    s.remove(&a);
                    s.insert(shadow);
                    s
                } else {
                    active.clone()
                };
                fork.push(TraceStep::Step { active: fork_active }, post.with_agent(shadow, target));
                forks.push(fork);
            }
            for t in &mut f.shadows {
                let q = Family::shadow_state(t, shadow, k);
                t.push(step.clone(), post.with_agent(shadow, q));
            }
            f.shadows.extend(forks);
            let r: BTreeSet<StateId> = f
                .shadows
                .iter()
                .map(|t| Family::shadow_state(t, shadow, k + 1))
                .collect();
            f.reachable.push(r);
        }
        base.push(step.clone(), post);

        if case != Case::Copy {
            replacements += 1;
            if replacements > bound {
                return Err(Error::Precondition(format!(
                    "fair continuation replaced {replacements} times, more than agents times states ({bound})"
                )));
            }
            fair = fair_schedule(spec, base.last(), limits)?;
            pos = 0;
            cycle_entry = None;
        }
    }

    let extensions = families
        .into_iter()
        .map(|f| {
            (
                f.agent,
                ShadowExtension {
                    base: base.clone(),
                    agent: f.agent,
                    shadow_agent: shadow,
                    shadows: f.shadows,
                    reachable: f.reachable,
                },
            )
        })
        .collect();
    Ok(ShadowRun {
        base,
        extensions,
        replacements,
        adjusted,
    })
}

/// First failure found by [`check_shadow_extension`]. `trace` is the index
/// of the offending shadow, `None` for the base or the family as a whole.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShadowViolation {
    pub trace: Option<usize>,
    pub index: usize,
    pub reason: String,
}

fn violation(
    trace: Option<usize>,
    index: usize,
    reason: impl Into<String>,
) -> core::result::Result<(), ShadowViolation> {
    Err(ShadowViolation {
        trace,
        index,
        reason: reason.into(),
    })
}

/// Checks every step, the projection onto the base execution and that some
/// shadow agrees with the agent at every index. A non-empty `reachable`
/// record must match the shadows and grow monotonically.
pub fn check_shadow_extension(
    spec: &ProtocolSpec,
    ext: &ShadowExtension,
    cap: PacketCap,
) -> core::result::Result<(), ShadowViolation> {
    let base = &ext.base;
    let (a, s) = (ext.agent, ext.shadow_agent);
    if let Err(Error::InvalidTrace { index, reason }) = validate_trace(spec, base, cap) {
        return violation(None, index, reason);
    }
    if base.configs[0].state_of(a).is_none() || base.configs[0].state_of(s).is_some() {
        return violation(None, 0, "agent missing or shadow agent already present");
    }
    if ext.shadows.is_empty() {
        return violation(None, 0, "no shadow executions");
    }
    for (i, t) in ext.shadows.iter().enumerate() {
        if let Err(Error::InvalidTrace { index, reason }) = validate_trace(spec, t, cap) {
            return violation(Some(i), index, reason);
        }
        if t.configs.len() != base.configs.len() || t.lasso_start != base.lasso_start {
            return violation(
                Some(i),
                t.configs.len().min(base.configs.len()),
                "shape differs from the base execution",
            );
        }
        if t.configs[0].state_of(s) != base.configs[0].state_of(a) {
            return violation(Some(i), 0, "shadow agent does not start in the agent's state");
        }
        for (k, (c, b)) in t.configs.iter().zip(&base.configs).enumerate() {
            if c.state_of(s).is_none() || &c.without_agent(s) != b {
                return violation(
                    Some(i),
                    k,
                    "removing the shadow agent does not give the base configuration",
                );
            }
        }
    }
    for k in 0..base.configs.len() {
        let q = base.configs[k].state_of(a);
        if !ext.shadows.iter().any(|t| t.configs[k].state_of(s) == q) {
            return violation(None, k, "no shadow agrees with the agent");
        }
    }
    if !ext.reachable.is_empty() {
        if ext.reachable.len() != base.configs.len() {
            return violation(
                None,
                ext.reachable.len().min(base.configs.len()),
                "reachable record has the wrong length",
            );
        }
        for (k, r) in ext.reachable.iter().enumerate() {
            let seen: BTreeSet<StateId> = ext.shadows.iter().filter_map(|t| t.configs[k].state_of(s)).collect();
            if &seen != r {
                return violation(None, k, "reachable record disagrees with the shadows");
            }
            if k > 0 && !ext.reachable[k - 1].is_subset(r) {
                return violation(None, k, "reachable set shrinks");
            }
        }
    }
    Ok(())
}

/// Shadow states one step can lead to: every `s'` such that some step from
/// `pre + {shadow: s}` ends in `post + {shadow: s'}`.
fn shadow_moves(
    spec: &ProtocolSpec,
    pre: &IdConfig,
    post: &IdConfig,
    shadow: AgentId,
    s: StateId,
    cap: PacketCap,
) -> BTreeSet<StateId> {
    engine_id_steps(spec, &pre.with_agent(shadow, s), cap)
        .into_iter()
        .filter(|st| &st.post.without_agent(shadow) == post)
        .filter_map(|st| st.post.state_of(shadow))
        .collect()
}

/// Exhaustive search for an execution from `init` of at most `max_len`
/// steps that ends in a terminal SCC and has a shadow extension around every
/// agent. Returns the execution found first.
///
/// Executions are compared as sequences of configurations. A shadow family
/// around `a` exists iff at every index `k` the state of `a` can be taken by
/// the shadow agent on some complete path, which is decided with forward and
/// backward reachability of shadow states.
pub fn shadow_extension_exists(
    spec: &ProtocolSpec,
    init: &IdConfig,
    max_len: usize,
    limits: GraphLimits,
) -> Result<Option<ExecutionTrace>> {
    let g = build_reach_graph(spec, &init.project(spec), limits)?;
    let shadow = init.fresh_agent();
    let agents: Vec<AgentId> = init.agents.keys().copied().collect();
    let mut search = Search {
        spec,
        cap: limits.packet_cap,
        shadow,
        agents: &agents,
        configs: alloc::vec![init.clone()],
        forward: alloc::vec![agents.iter().map(|a| [init.agents[a]].into_iter().collect()).collect()],
        moves: Vec::new(),
    };
    let terminal = |c: &IdConfig| g.node_id(&c.project(spec)).is_some_and(|u| g.is_terminal_node(u));
    Ok(search.run(max_len, &terminal))
}

type Moves = BTreeMap<StateId, BTreeSet<StateId>>;

struct Search<'a> {
    spec: &'a ProtocolSpec,
    cap: PacketCap,
    shadow: AgentId,
    agents: &'a [AgentId],
    configs: Vec<IdConfig>,
    /// Per index, per agent: shadow states reachable from the start.
    forward: Vec<Vec<BTreeSet<StateId>>>,
    /// Per step, per agent: shadow moves from forward-reachable states.
    moves: Vec<Vec<Moves>>,
}

impl<'a> Search<'a> {
    fn run(&mut self, budget: usize, terminal: &dyn Fn(&IdConfig) -> bool) -> Option<ExecutionTrace> {
        let cur = self.configs.last().expect("nonempty").clone();
        if terminal(&cur) && self.backward_ok() {
            let mut t = ExecutionTrace::new(self.configs[0].clone());
            for w in self.configs.windows(2) {
                let active = engine_id_steps(self.spec, &w[0], self.cap)
                    .into_iter()
                    .find(|s| s.post == w[1])
                    .expect("step exists")
                    .active;
                t.push(TraceStep::Step { active }, w[1].clone());
            }
            return Some(t);
        }
        if budget == 0 {
            return None;
        }
        let posts: BTreeSet<IdConfig> = engine_id_steps(self.spec, &cur, self.cap)
            .into_iter()
            .map(|s| s.post)
            .collect();
        for post in posts {
            let mut fwd = Vec::new();
            let mut mv = Vec::new();
            let mut alive = true;
            for (i, a) in self.agents.iter().enumerate() {
                let mut moves = Moves::new();
                let mut next = BTreeSet::new();
                for &s in &self.forward.last().expect("nonempty")[i] {
                    let m = shadow_moves(self.spec, &cur, &post, self.shadow, s, self.cap);
                    next.extend(m.iter().copied());
                    moves.insert(s, m);
                }
                alive &= next.contains(&post.agents[a]);
                fwd.push(next);
                mv.push(moves);
            }
            if !alive {
                continue;
            }
            self.configs.push(post);
            self.forward.push(fwd);
            self.moves.push(mv);
            if let Some(t) = self.run(budget - 1, terminal) {
                return Some(t);
            }
            self.configs.pop();
            self.forward.pop();
            self.moves.pop();
        }
        None
    }

    /// The agent's state lies on a complete shadow path at every index.
    fn backward_ok(&self) -> bool {
        for (i, a) in self.agents.iter().enumerate() {
            let n = self.configs.len() - 1;
            let mut viable = self.forward[n][i].clone();
            if !viable.contains(&self.configs[n].agents[a]) {
                return false;
            }
            for k in (0..n).rev() {
                viable = self.moves[k][i]
                    .iter()
                    .filter(|(_, to)| !to.is_disjoint(&viable))
                    .map(|(s, _)| *s)
                    .collect();
                if !viable.contains(&self.configs[k].agents[a]) {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MultiConfig;
    use crate::corpus;
    use crate::fairness::check_fairness;
    use crate::unreliable::is_unreliable_variant;

    fn id(states: &[u32], messages: &[u32]) -> IdConfig {
        IdConfig::from_multi(&MultiConfig::from_counts(states.to_vec(), messages.to_vec()))
    }

    fn limits(cap: u32) -> GraphLimits {
        GraphLimits::new(PacketCap::Finite(cap))
    }

    fn build_and_check(spec: &ProtocolSpec, init: &IdConfig, cap: u32) -> ShadowRun {
        let run = build_shadow_extension(spec, init, limits(cap), DEFAULT_MAX_STEPS).unwrap();
        assert!(check_fairness(spec, &run.base, limits(cap)).unwrap().fair);
        for ext in run.extensions.values() {
            assert_eq!(check_shadow_extension(spec, ext, PacketCap::Finite(cap)), Ok(()));
        }
        assert!(run.replacements <= init.agents.len() * spec.num_states());
        for (k, step) in &run.adjusted {
            assert!(
                is_unreliable_variant(step, &run.base.configs[k + 1]) || {
                    // The continuation's step may itself be lossy; compare with
                    // the reliable step it came from.
                    crate::step::id_successors(spec, &step.pre, PacketCap::Finite(cap))
                        .iter()
                        .any(|b| b.active == step.active && is_unreliable_variant(b, &run.base.configs[k + 1]))
                }
            );
        }
        run
    }

    #[test]
    fn io_threshold_two() {
        let spec = corpus::builtin("threshold(2)").unwrap().spec.with_unreliable(true);
        let run = build_and_check(&spec, &id(&[2, 0], &[]), 0);
        let two = spec.state_id("2").unwrap();
        assert!(run.base.last().agents.values().all(|q| *q == two));
        for ext in run.extensions.values() {
            assert!(ext.reachable.last().unwrap().contains(&two));
        }
    }

    #[test]
    fn lone_agent_without_steps() {
        let spec = corpus::eq_pp().with_unreliable(true);
        let run = build_and_check(&spec, &id(&[1, 0, 0], &[]), 0);
        assert_eq!(run.base.steps, alloc::vec![TraceStep::Stutter]);
        let ext = &run.extensions[&AgentId(0)];
        assert_eq!(ext.shadows.len(), 1);
        assert_eq!(ext.shadows[0].configs[1].state_of(ext.shadow_agent), Some(StateId(0)));
    }

    #[test]
    fn pp_equality_forks() {
        let spec = corpus::eq_pp().with_unreliable(true);
        let run = build_and_check(&spec, &id(&[1, 1, 0], &[]), 0);
        assert!(run.replacements > 0);
        assert!(run.extensions.values().all(|e| e.shadows.len() > 1));
    }

    #[test]
    fn tampered_extensions_are_rejected() {
        let spec = corpus::eq_pp().with_unreliable(true);
        let run = build_shadow_extension(&spec, &id(&[1, 1, 0], &[]), limits(0), DEFAULT_MAX_STEPS).unwrap();
        let ext = &run.extensions[&AgentId(0)];

        // A shadow that moves the other agent differently from the base.
        let mut bad = ext.clone();
        let last = bad.shadows[0].configs.len() - 1;
        let q = bad.shadows[0].configs[last].state_of(AgentId(1)).unwrap();
        let other = StateId((q.0 + 1) % 3);
        bad.shadows[0].configs[last] = bad.shadows[0].configs[last].with_agent(AgentId(1), other);
        assert!(check_shadow_extension(&spec, &bad, PacketCap::Finite(0)).is_err());

        // Drop every shadow that coincides with the agent at one index.
        let k = (0..ext.base.configs.len())
            .find(|k| {
                let q = ext.base.configs[*k].state_of(AgentId(0));
                ext.shadows
                    .iter()
                    .any(|t| t.configs[*k].state_of(ext.shadow_agent) != q)
            })
            .unwrap();
        let q = ext.base.configs[k].state_of(AgentId(0));
        let mut missing = ext.clone();
        missing.reachable.clear();
        missing.shadows.retain(|t| t.configs[k].state_of(ext.shadow_agent) != q);
        let v = check_shadow_extension(&spec, &missing, PacketCap::Finite(0)).unwrap_err();
        assert_eq!((v.trace, v.index), (None, k));
    }

    #[test]
    fn oracle_agrees_on_small_cases() {
        let plusminus = corpus::plusminus();
        assert!(shadow_extension_exists(&plusminus, &id(&[2, 0, 0], &[]), 8, limits(0))
            .unwrap()
            .is_none());
        let unreliable = plusminus.with_unreliable(true);
        let t = shadow_extension_exists(&unreliable, &id(&[2, 0, 0], &[]), 8, limits(0))
            .unwrap()
            .unwrap();
        validate_trace(&unreliable, &t, PacketCap::Finite(0)).unwrap();
        let eq = corpus::eq_pp().with_unreliable(true);
        assert!(shadow_extension_exists(&eq, &id(&[1, 1, 0], &[]), 8, limits(0))
            .unwrap()
            .is_some());
    }
}
