//! Configurations, identified and anonymous, and the step records relating them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::protocol::{MessageId, ProtocolSpec, StateId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u32);

/// Anonymous configuration: agents per state and packets per message.
///
/// Ordering is lexicographic on the state counts, then the message counts,
/// and serves as the canonical node order everywhere.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiConfig {
    pub states: Vec<u32>,
    pub messages: Vec<u32>,
}

impl MultiConfig {
    pub fn empty(spec: &ProtocolSpec) -> Self {
        MultiConfig {
            states: vec![0; spec.num_states()],
            messages: vec![0; spec.num_messages()],
        }
    }

    pub fn from_counts(states: Vec<u32>, messages: Vec<u32>) -> Self {
        MultiConfig { states, messages }
    }

    pub fn agents(&self) -> u32 {
        self.states.iter().sum()
    }

    pub fn packets(&self) -> u32 {
        self.messages.iter().sum()
    }

    pub fn count(&self, q: StateId) -> u32 {
        self.states[q.index()]
    }

    pub fn supply(&self, m: MessageId) -> u32 {
        self.messages[m.index()]
    }

    pub fn with_agent(&self, q: StateId) -> Self {
        let mut c = self.clone();
        c.states[q.index()] += 1;
        c
    }

    pub fn with_packet(&self, m: MessageId) -> Self {
        let mut c = self.clone();
        c.messages[m.index()] += 1;
        c
    }

    /// Component-wise `self <= other` over states and messages.
    pub fn covered_by(&self, other: &MultiConfig) -> bool {
        self.states.iter().zip(&other.states).all(|(a, b)| a <= b)
            && self.messages.iter().zip(&other.messages).all(|(a, b)| a <= b)
    }

    /// States with at least one agent.
    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, n)| **n > 0)
            .map(|(i, _)| StateId(i as u32))
    }

    /// All configurations over `num_states` and `num_messages` with between
    /// `min_agents` and `max_agents` agents and at most `max_packets` packets.
    pub fn enumerate(
        num_states: usize,
        num_messages: usize,
        min_agents: u32,
        max_agents: u32,
        max_packets: u32,
    ) -> Vec<MultiConfig> {
        let mut out = Vec::new();
        let mut state_parts = Vec::new();
        for n in min_agents..=max_agents {
            state_parts.extend(compositions(n, num_states));
        }
        let mut message_parts = Vec::new();
        for k in 0..=max_packets {
            message_parts.extend(compositions(k, num_messages));
        }
        for s in &state_parts {
            for m in &message_parts {
                out.push(MultiConfig::from_counts(s.clone(), m.clone()));
            }
        }
        out.sort();
        out
    }
}

/// Every way to write `n` as an ordered sum of `parts` nonnegative integers.
/// With zero parts only `n = 0` has a (single, empty) composition.
pub fn compositions(n: u32, parts: usize) -> Vec<Vec<u32>> {
    fn go(n: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=n {
            prefix.push(first);
            go(n - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts == 0 {
        if n == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    go(n, parts, &mut Vec::new(), &mut out);
    out
}

/// Configuration with individually named agents and packets.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdConfig {
    pub agents: BTreeMap<AgentId, StateId>,
    pub packets: BTreeMap<PacketId, MessageId>,
}

impl IdConfig {
    /// Agents numbered from 0 in state order, packets numbered from 0 in
    /// message order.
    pub fn from_multi(c: &MultiConfig) -> Self {
        let mut agents = BTreeMap::new();
        let mut next = 0;
        for (q, n) in c.states.iter().enumerate() {
            for _ in 0..*n {
                agents.insert(AgentId(next), StateId(q as u32));
                next += 1;
            }
        }
        let mut packets = BTreeMap::new();
        let mut next = 0;
        for (m, n) in c.messages.iter().enumerate() {
            for _ in 0..*n {
                packets.insert(PacketId(next), MessageId(m as u32));
                next += 1;
            }
        }
        IdConfig { agents, packets }
    }

    pub fn project(&self, spec: &ProtocolSpec) -> MultiConfig {
        let mut c = MultiConfig::empty(spec);
        for q in self.agents.values() {
            c.states[q.index()] += 1;
        }
        for m in self.packets.values() {
            c.messages[m.index()] += 1;
        }
        c
    }

    pub fn state_of(&self, a: AgentId) -> Option<StateId> {
        self.agents.get(&a).copied()
    }

    pub fn agent_ids(&self) -> BTreeSet<AgentId> {
        self.agents.keys().copied().collect()
    }

    /// The smallest agent id not in use.
    pub fn fresh_agent(&self) -> AgentId {
        let mut id = 0;
        while self.agents.contains_key(&AgentId(id)) {
            id += 1;
        }
        AgentId(id)
    }

    /// The `count` smallest packet ids not in use.
    pub fn fresh_packets(&self, count: usize) -> Vec<PacketId> {
        let mut out = Vec::with_capacity(count);
        let mut id = 0;
        while out.len() < count {
            if !self.packets.contains_key(&PacketId(id)) {
                out.push(PacketId(id));
            }
            id += 1;
        }
        out
    }

    pub fn with_agent(&self, a: AgentId, q: StateId) -> Self {
        let mut c = self.clone();
        c.agents.insert(a, q);
        c
    }

    pub fn without_agent(&self, a: AgentId) -> Self {
        let mut c = self.clone();
        c.agents.remove(&a);
        c
    }
}

/// A step `(pre, active, post)` between identified configurations.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepInstance {
    pub pre: IdConfig,
    pub active: BTreeSet<AgentId>,
    pub post: IdConfig,
}

impl StepInstance {
    pub fn conserves_agents(&self) -> bool {
        self.pre.agents.len() == self.post.agents.len() && self.pre.agents.keys().eq(self.post.agents.keys())
    }
}

/// Anonymous description of a step: which state changes happen to active
/// and passive agents, which messages are consumed and which are produced.
///
/// Canonical form keeps every list sorted and omits passive agents that keep
/// their state; active agents are always listed, including unchanged ones.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepSchema {
    pub active: Vec<(StateId, StateId)>,
    pub passive: Vec<(StateId, StateId)>,
    pub consumed: Vec<MessageId>,
    pub produced: Vec<MessageId>,
}

impl StepSchema {
    pub fn canonical(mut self) -> Self {
        self.active.sort();
        self.passive.retain(|(a, b)| a != b);
        self.passive.sort();
        self.consumed.sort();
        self.produced.sort();
        self
    }

    /// Agents per state the schema needs, counting passive guards too.
    fn demand(&self, spec: &ProtocolSpec) -> (Vec<u32>, Vec<u32>) {
        let mut states = vec![0; spec.num_states()];
        for (from, _) in self.active.iter().chain(&self.passive) {
            states[from.index()] += 1;
        }
        let mut messages = vec![0; spec.num_messages()];
        for m in &self.consumed {
            messages[m.index()] += 1;
        }
        (states, messages)
    }

    pub fn enabled(&self, spec: &ProtocolSpec, c: &MultiConfig) -> bool {
        let (states, messages) = self.demand(spec);
        states.iter().zip(&c.states).all(|(d, n)| d <= n) && messages.iter().zip(&c.messages).all(|(d, n)| d <= n)
    }

    /// Result of applying the schema, or `None` if it is not enabled.
    pub fn apply(&self, spec: &ProtocolSpec, c: &MultiConfig) -> Option<MultiConfig> {
        if !self.enabled(spec, c) {
            return None;
        }
        let mut out = c.clone();
        for (from, to) in self.active.iter().chain(&self.passive) {
            out.states[from.index()] -= 1;
            out.states[to.index()] += 1;
        }
        for m in &self.consumed {
            out.messages[m.index()] -= 1;
        }
        for m in &self.produced {
            out.messages[m.index()] += 1;
        }
        Some(out)
    }

    /// Whether any agent changes state.
    pub fn changes_states(&self) -> bool {
        self.active.iter().chain(&self.passive).any(|(a, b)| a != b)
    }
}
