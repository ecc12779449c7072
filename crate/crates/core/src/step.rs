//! One-step semantics of every protocol class.
//!
//! [`successors`] enumerates reliable steps on anonymous configurations.
//! Identified steps are obtained by instantiating those schemas on concrete
//! agents and packets, so both levels agree by construction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{compositions, AgentId, IdConfig, MultiConfig, PacketId, StepInstance, StepSchema};
use crate::protocol::{PacketCap, ProtocolSpec, StateId, Transitions};

/// Deduplicated successor steps, sorted by `(schema, config)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Successors {
    pub steps: Vec<(StepSchema, MultiConfig)>,
    /// Some packet-producing step was omitted because of the cap.
    pub capped: bool,
}

impl Successors {
    pub fn configs(&self) -> BTreeSet<MultiConfig> {
        self.steps.iter().map(|(_, c)| c.clone()).collect()
    }
}

/// Collects schemas, applying the packet cap.
struct Collector<'a> {
    spec: &'a ProtocolSpec,
    from: &'a MultiConfig,
    cap: PacketCap,
    out: BTreeSet<(StepSchema, MultiConfig)>,
    capped: bool,
}

impl<'a> Collector<'a> {
    fn push(&mut self, schema: StepSchema) {
        let schema = schema.canonical();
        let Some(next) = schema.apply(self.spec, self.from) else {
            return;
        };
        if !self.cap.allows(self.from.packets(), next.packets()) {
            self.capped = true;
            return;
        }
        self.out.insert((schema, next));
    }

    fn finish(self) -> Successors {
        Successors {
            steps: self.out.into_iter().collect(),
            capped: self.capped,
        }
    }
}

/// All reliable one-step successors of `c`.
pub fn successors(spec: &ProtocolSpec, c: &MultiConfig, cap: PacketCap) -> Successors {
    let mut col = Collector {
        spec,
        from: c,
        cap,
        out: BTreeSet::new(),
        capped: false,
    };
    match &spec.transitions {
        Transitions::Pairwise(rules) => {
            let second_passive = spec.kind.second_agent_passive();
            for r in rules {
                let first = (r.pre.0, r.post.0);
                let second = (r.pre.1, r.post.1);
                let schema = if second_passive {
                    StepSchema {
                        active: vec![first],
                        passive: vec![second],
                        ..Default::default()
                    }
                } else {
                    StepSchema {
                        active: vec![first, second],
                        ..Default::default()
                    }
                };
                // The passive partner of a transmission must exist even when it
                // keeps its state, so check the pair before canonicalising.
                let needed = if r.pre.0 == r.pre.1 { 2 } else { 1 };
                if c.count(r.pre.0) >= needed && c.count(r.pre.1) >= 1 {
                    col.push(schema);
                }
            }
        }
        Transitions::Messages { send, receive } => {
            for r in send {
                col.push(StepSchema {
                    active: vec![(r.from, r.to)],
                    produced: vec![r.message],
                    ..Default::default()
                });
            }
            for r in receive {
                col.push(StepSchema {
                    active: vec![(r.from, r.to)],
                    consumed: vec![r.message],
                    ..Default::default()
                });
            }
        }
        Transitions::Broadcast { send, receive } => {
            for &(q, q2) in send {
                if c.count(q) == 0 {
                    continue;
                }
                let mut others = c.states.clone();
                others[q.index()] -= 1;
                for passive in broadcast_receivers(spec, &others, q, receive) {
                    col.push(StepSchema {
                        active: vec![(q, q2)],
                        passive,
                        ..Default::default()
                    });
                }
            }
        }
        Transitions::Custom(schemas) => {
            for s in schemas {
                if s.enabled(spec, c) {
                    col.push(s.clone());
                }
            }
        }
    }
    col.finish()
}

/// Every assignment of receive outcomes to the non-sending agents, as lists
/// of state changes. Receivers without a matching rule keep their state.
fn broadcast_receivers(
    spec: &ProtocolSpec,
    others: &[u32],
    sender: StateId,
    receive: &[crate::protocol::BroadcastReceive],
) -> Vec<Vec<(StateId, StateId)>> {
    let mut partial: Vec<Vec<(StateId, StateId)>> = vec![Vec::new()];
    for s in spec.state_ids() {
        let n = others[s.index()];
        if n == 0 {
            continue;
        }
        let mut outcomes: Vec<StateId> = receive
            .iter()
            .filter(|r| r.receiver == s && r.sender == sender)
            .map(|r| r.to)
            .collect();
        outcomes.sort();
        outcomes.dedup();
        if outcomes.is_empty() {
            outcomes.push(s);
        }
        let splits = compositions(n, outcomes.len());
        let mut next = Vec::with_capacity(partial.len() * splits.len());
        for prefix in &partial {
            for split in &splits {
                let mut changes = prefix.clone();
                for (to, k) in outcomes.iter().zip(split) {
                    for _ in 0..*k {
                        changes.push((s, *to));
                    }
                }
                next.push(changes);
            }
        }
        partial = next;
    }
    partial
}

/// All identified steps of the schema on `c`, with fresh packets taking the
/// smallest unused ids.
pub fn instantiate(schema: &StepSchema, c: &IdConfig) -> Vec<StepInstance> {
    let roles: Vec<(bool, StateId, StateId)> = schema
        .active
        .iter()
        .map(|&(a, b)| (true, a, b))
        .chain(schema.passive.iter().map(|&(a, b)| (false, a, b)))
        .collect();
    let mut agent_choices: BTreeSet<(BTreeSet<AgentId>, BTreeMap<AgentId, StateId>)> = BTreeSet::new();
    assign_agents(
        &roles,
        c,
        &mut BTreeSet::new(),
        &mut BTreeSet::new(),
        &mut c.agents.clone(),
        &mut agent_choices,
    );

    let mut packet_choices: BTreeSet<Vec<PacketId>> = BTreeSet::new();
    assign_packets(&schema.consumed, c, &mut Vec::new(), &mut packet_choices);

    let fresh = c.fresh_packets(schema.produced.len());
    let mut out = BTreeSet::new();
    for (active, agents) in &agent_choices {
        for consumed in &packet_choices {
            let mut packets = c.packets.clone();
            for p in consumed {
                packets.remove(p);
            }
            for (p, m) in fresh.iter().zip(&schema.produced) {
                packets.insert(*p, *m);
            }
            out.insert(StepInstance {
                pre: c.clone(),
                active: active.clone(),
                post: IdConfig {
                    agents: agents.clone(),
                    packets,
                },
            });
        }
    }
    out.into_iter().collect()
}

fn assign_agents(
    roles: &[(bool, StateId, StateId)],
    c: &IdConfig,
    used: &mut BTreeSet<AgentId>,
    active: &mut BTreeSet<AgentId>,
    post: &mut BTreeMap<AgentId, StateId>,
    out: &mut BTreeSet<(BTreeSet<AgentId>, BTreeMap<AgentId, StateId>)>,
) {
    let Some(&(is_active, from, to)) = roles.first() else {
        out.insert((active.clone(), post.clone()));
        return;
    };
    for (&a, &q) in &c.agents {
        if q != from || used.contains(&a) {
            continue;
        }
        used.insert(a);
        if is_active {
            active.insert(a);
        }
        post.insert(a, to);
        assign_agents(&roles[1..], c, used, active, post, out);
        post.insert(a, q);
        if is_active {
            active.remove(&a);
        }
        used.remove(&a);
    }
}

fn assign_packets(
    consumed: &[crate::protocol::MessageId],
    c: &IdConfig,
    chosen: &mut Vec<PacketId>,
    out: &mut BTreeSet<Vec<PacketId>>,
) {
    let Some(&m) = consumed.first() else {
        let mut set = chosen.clone();
        set.sort();
        out.insert(set);
        return;
    };
    for (&p, &pm) in &c.packets {
        if pm != m || chosen.contains(&p) {
            continue;
        }
        chosen.push(p);
        assign_packets(&consumed[1..], c, chosen, out);
        chosen.pop();
    }
}

/// All reliable identified steps from `c`.
pub fn id_successors(spec: &ProtocolSpec, c: &IdConfig, cap: PacketCap) -> Vec<StepInstance> {
    let multi = c.project(spec);
    let mut out = BTreeSet::new();
    for (schema, _) in successors(spec, &multi, cap).steps {
        out.extend(instantiate(&schema, c));
    }
    out.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Output {
    Consensus(bool),
    Mixed,
}

impl Output {
    pub fn value(self) -> Option<bool> {
        match self {
            Output::Consensus(b) => Some(b),
            Output::Mixed => None,
        }
    }
}

/// Consensus value of the agents of `c`; packets are ignored. A configuration
/// without agents is reported as mixed.
pub fn output_of(spec: &ProtocolSpec, c: &MultiConfig) -> Output {
    let mut seen = [false, false];
    for q in c.support() {
        seen[spec.output(q) as usize] = true;
    }
    match seen {
        [true, false] => Output::Consensus(false),
        [false, true] => Output::Consensus(true),
        _ => Output::Mixed,
    }
}

/// The input configuration with `x[i]` agents for the `i`-th input symbol.
pub fn input_config(spec: &ProtocolSpec, x: &[u32]) -> crate::Result<MultiConfig> {
    if x.len() != spec.sigma.len() {
        return Err(crate::Error::Arity {
            expected: spec.sigma.len(),
            got: x.len(),
        });
    }
    if x.iter().all(|n| *n == 0) {
        return Err(crate::Error::EmptyInput);
    }
    let mut c = MultiConfig::empty(spec);
    for (sym, n) in x.iter().enumerate() {
        c.states[spec.input_map[sym].index()] += n;
    }
    Ok(c)
}
