#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use popver_core::config::{AgentId, IdConfig, MultiConfig, PacketId, StepInstance, StepSchema};
use popver_core::corpus;
use popver_core::protocol::{
    validate_protocol, Kind, MessageId, PacketCap, PairRule, ProtocolSpec, ReceiveRule, StateId, Transitions,
};
use popver_core::step::{id_successors, successors, Successors};
use popver_core::unreliable::{engine_id_steps, unreliable_successors};

fn q(i: u32) -> StateId {
    StateId(i)
}

fn strings(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// A token handed from one agent to another.
pub fn it_token() -> ProtocolSpec {
    let (idle, token) = (q(0), q(1));
    let mut spec = corpus::plusminus();
    spec.name = "it_token".into();
    spec.kind = Kind::ImmediateTransmission;
    spec.states = strings(&["idle", "token"]);
    spec.input_map = vec![token];
    spec.output_map = vec![false, true];
    spec.transitions = Transitions::Pairwise(vec![
        PairRule {
            pre: (token, idle),
            post: (idle, token),
        },
        PairRule {
            pre: (token, token),
            post: (idle, token),
        },
    ]);
    spec
}

/// Queued equality with a total receive table.
pub fn dt_equality() -> ProtocolSpec {
    let mut spec = corpus::eq_qt();
    spec.name = "dt_equality".into();
    spec.kind = Kind::DelayedTransmission;
    if let Transitions::Messages { receive, .. } = &mut spec.transitions {
        for m in 0..3 {
            receive.push(ReceiveRule {
                from: q(2),
                message: MessageId(m),
                to: q(2),
            });
        }
    }
    spec
}

/// Schemas with a passive partner, a double consumption and two actives.
pub fn custom_mix() -> ProtocolSpec {
    let (a, b, c) = (q(0), q(1), q(2));
    let m = MessageId(0);
    let mut spec = corpus::plusminus();
    spec.name = "custom_mix".into();
    spec.kind = Kind::Custom;
    spec.states = strings(&["a", "b", "c"]);
    spec.messages = strings(&["m"]);
    spec.transitions = Transitions::Custom(vec![
        StepSchema {
            active: vec![(a, b)],
            passive: vec![(b, c)],
            produced: vec![m],
            ..Default::default()
        },
        StepSchema {
            active: vec![(c, a)],
            consumed: vec![m, m],
            ..Default::default()
        },
        StepSchema {
            active: vec![(a, a), (b, b)],
            ..Default::default()
        },
    ]);
    spec
}

/// One or more protocols of every kind, each with and without message loss.
pub fn axiom_fixtures() -> Vec<ProtocolSpec> {
    let mut base: Vec<ProtocolSpec> = [
        "eq_pp",
        "parity",
        "eq_io",
        "threshold(2)",
        "eq_qt",
        "qt_atleast2",
        "eq_bcast",
    ]
    .iter()
    .map(|n| corpus::builtin(n).unwrap().spec.with_unreliable(false))
    .collect();
    base.extend([it_token(), dt_equality(), corpus::do_presence(), custom_mix()]);
    let mut out = Vec::new();
    for spec in base {
        let v = validate_protocol(&spec);
        assert!(v.is_empty(), "{}: {:?}", spec.name, v);
        out.push(spec.with_unreliable(false));
        out.push(spec.with_unreliable(true));
    }
    let kinds: BTreeSet<Kind> = out.iter().map(|s| s.kind).collect();
    assert_eq!(kinds.len(), Kind::ALL.len());
    out
}

pub fn multi_steps(spec: &ProtocolSpec, c: &MultiConfig) -> Successors {
    unreliable_successors(spec, c, PacketCap::Unbounded)
}

pub fn id_steps(spec: &ProtocolSpec, c: &IdConfig) -> Vec<StepInstance> {
    engine_id_steps(spec, c, PacketCap::Unbounded)
}

/// Renaming of agents and packets applied to configurations and steps.
#[derive(Clone, Debug)]
pub struct Renaming {
    pub agents: BTreeMap<AgentId, AgentId>,
    pub packets: BTreeMap<PacketId, PacketId>,
}

impl Renaming {
    pub fn config(&self, c: &IdConfig) -> IdConfig {
        IdConfig {
            agents: c.agents.iter().map(|(a, s)| (self.agent(*a), *s)).collect(),
            packets: c.packets.iter().map(|(p, m)| (self.packet(*p), *m)).collect(),
        }
    }

    fn agent(&self, a: AgentId) -> AgentId {
        *self.agents.get(&a).unwrap_or(&a)
    }

    fn packet(&self, p: PacketId) -> PacketId {
        *self.packets.get(&p).unwrap_or(&p)
    }

    pub fn step(&self, s: &StepInstance) -> StepInstance {
        StepInstance {
            pre: self.config(&s.pre),
            active: s.active.iter().map(|a| self.agent(*a)).collect(),
            post: self.config(&s.post),
        }
    }
}

pub fn conservation(spec: &ProtocolSpec, c: &IdConfig) -> Result<(), String> {
    for s in id_steps(spec, c) {
        if !s.conserves_agents() || s.pre != *c {
            return Err(format!("{}: step {s:?} does not conserve agents", spec.name));
        }
    }
    let m = c.project(spec);
    for (_, next) in multi_steps(spec, &m).steps {
        if next.agents() != m.agents() {
            return Err(format!("{}: {m:?} -> {next:?} changes the agent count", spec.name));
        }
    }
    Ok(())
}

pub fn anonymity(spec: &ProtocolSpec, c: &IdConfig, r: &Renaming) -> Result<(), String> {
    let renamed: BTreeSet<StepInstance> = id_steps(spec, c).iter().map(|s| r.step(s)).collect();
    let direct: BTreeSet<StepInstance> = id_steps(spec, &r.config(c)).into_iter().collect();
    if renamed != direct {
        return Err(format!("{}: renaming {r:?} of {c:?} changes the steps", spec.name));
    }
    Ok(())
}

pub fn extra_packet(spec: &ProtocolSpec, c: &MultiConfig) -> Result<(), String> {
    for m in spec.message_ids() {
        let bigger = multi_steps(spec, &c.with_packet(m)).configs();
        for (_, next) in multi_steps(spec, c).steps {
            if !bigger.contains(&next.with_packet(m)) {
                return Err(format!(
                    "{}: {c:?} -> {next:?} is lost after adding a packet of {m:?}",
                    spec.name
                ));
            }
        }
    }
    Ok(())
}

pub fn passive_extension(spec: &ProtocolSpec, c: &MultiConfig) -> Result<(), String> {
    for extra in spec.state_ids() {
        let bigger = multi_steps(spec, &c.with_agent(extra)).configs();
        for (_, next) in multi_steps(spec, c).steps {
            if !spec.state_ids().any(|to| bigger.contains(&next.with_agent(to))) {
                return Err(format!(
                    "{}: {c:?} -> {next:?} is lost after adding an agent in {extra:?}",
                    spec.name
                ));
            }
        }
    }
    Ok(())
}

pub fn coherence(spec: &ProtocolSpec, c: &IdConfig) -> Result<(), String> {
    let m = c.project(spec);
    let projected: BTreeSet<MultiConfig> = id_steps(spec, c).iter().map(|s| s.post.project(spec)).collect();
    if projected != multi_steps(spec, &m).configs() {
        return Err(format!(
            "{}: identified and anonymous successors of {m:?} differ",
            spec.name
        ));
    }
    let reliable: BTreeSet<MultiConfig> = id_successors(spec, c, PacketCap::Unbounded)
        .iter()
        .map(|s| s.post.project(spec))
        .collect();
    if reliable != successors(spec, &m, PacketCap::Unbounded).configs() {
        return Err(format!("{}: reliable successors of {m:?} differ", spec.name));
    }
    Ok(())
}

/// Every axiom on one identified configuration and one renaming.
pub fn all_axioms(spec: &ProtocolSpec, c: &IdConfig, r: &Renaming) -> Result<(), String> {
    let m = c.project(spec);
    conservation(spec, c)?;
    anonymity(spec, c, r)?;
    extra_packet(spec, &m)?;
    passive_extension(spec, &m)?;
    coherence(spec, c)
}

/// Identified configuration with the given agent ids, states and packets.
pub fn id_config(spec: &ProtocolSpec, agents: &[(u32, u32)], packets: &[(u32, u32)]) -> IdConfig {
    IdConfig {
        agents: agents
            .iter()
            .map(|(a, s)| (AgentId(*a), StateId(s % spec.num_states() as u32)))
            .collect(),
        packets: packets
            .iter()
            .filter(|_| spec.num_messages() > 0)
            .map(|(p, m)| (PacketId(*p), MessageId(m % spec.num_messages() as u32)))
            .collect(),
    }
}

pub mod strategy {
    use super::*;
    use proptest::prelude::*;
    use proptest::sample::subsequence;

    pub type Case = (usize, Vec<(u32, u32)>, Vec<(u32, u32)>, Vec<u32>, bool);

    /// Fixture index, configuration with up to 3 agents and 2 packets, and
    /// a renaming of both.
    pub fn case(fixtures: usize) -> impl Strategy<Value = Case> {
        (
            0..fixtures,
            subsequence((0u32..6).collect::<Vec<_>>(), 1..=3),
            subsequence((0u32..4).collect::<Vec<_>>(), 0..=2),
        )
            .prop_flat_map(|(f, agent_ids, packet_ids)| {
                let na = agent_ids.len();
                let np = packet_ids.len();
                (
                    Just(f),
                    prop::collection::vec(0u32..4, na)
                        .prop_map(move |s| agent_ids.iter().copied().zip(s).collect::<Vec<_>>()),
                    prop::collection::vec(0u32..3, np)
                        .prop_map(move |m| packet_ids.iter().copied().zip(m).collect::<Vec<_>>()),
                    subsequence((0u32..8).collect::<Vec<_>>(), na).prop_shuffle(),
                    any::<bool>(),
                )
            })
    }

    /// Agents go to `targets` in order; packets are reversed when `flip`.
    pub fn renaming(agents: &[(u32, u32)], packets: &[(u32, u32)], targets: &[u32], flip: bool) -> Renaming {
        let ids: Vec<u32> = packets.iter().map(|(p, _)| *p).collect();
        let mut shuffled = ids.clone();
        if flip {
            shuffled.reverse();
        }
        Renaming {
            agents: agents
                .iter()
                .zip(targets)
                .map(|((a, _), t)| (AgentId(*a), AgentId(*t)))
                .collect(),
            packets: ids
                .iter()
                .zip(&shuffled)
                .map(|(a, b)| (PacketId(*a), PacketId(*b)))
                .collect(),
        }
    }
}

/// Exhaustive pass over every configuration with 1..=3 agents and at most
/// 2 packets, with agents renamed by reversal. Returns the number of checks.
pub fn exhaustive_axioms(fixtures: &[ProtocolSpec]) -> Result<usize, String> {
    let mut checked = 0;
    for spec in fixtures {
        for m in MultiConfig::enumerate(spec.num_states(), spec.num_messages(), 1, 3, 2) {
            let c = IdConfig::from_multi(&m);
            let n = c.agents.len() as u32;
            let r = Renaming {
                agents: (0..n).map(|a| (AgentId(a), AgentId(n - 1 - a))).collect(),
                packets: (0..c.packets.len() as u32)
                    .map(|p| (PacketId(p), PacketId(c.packets.len() as u32 - 1 - p)))
                    .collect(),
            };
            all_axioms(spec, &c, &r)?;
            checked += 1;
        }
    }
    Ok(checked)
}
