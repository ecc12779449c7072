//! Truncation constants relative to an agent bound.
//!
//! The box is every packet-free configuration with `1..=agent_bound` agents.
//! Adding agents never removes a way to reach a configuration, even under a
//! packet cap, so the configurations that are not stable consensuses form an
//! upward closed set inside the box and its minimal elements bound `K`.

use alloc::vec::Vec;

use crate::config::MultiConfig;
use crate::error::Result;
use crate::graph::{build_reach_graph_from, GraphLimits, ReachGraph};
use crate::protocol::{PacketCap, ProtocolSpec, StateId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationReport {
    /// Valid for configurations within the agent bound only.
    pub k: u32,
    /// Minimal configurations of the box that are not stable consensuses.
    pub minimal: Vec<MultiConfig>,
    pub configs: usize,
    pub capped: bool,
}

fn agent_box(spec: &ProtocolSpec, agent_bound: u32) -> Vec<MultiConfig> {
    MultiConfig::enumerate(spec.num_states(), spec.num_messages(), 1, agent_bound, 0)
}

fn stable_map(spec: &ProtocolSpec, configs: &[MultiConfig], limits: GraphLimits) -> Result<ReachGraph> {
    build_reach_graph_from(spec, configs, limits)
}

fn is_stable(g: &ReachGraph, c: &MultiConfig) -> bool {
    let u = g.node_id(c).expect("box configuration is a root");
    g.cap_free_stable_value(u).is_some()
}

/// Smallest `K` that works for every configuration in the box: one more
/// than the largest coordinate of a minimal non-stable configuration, and 1
/// when every configuration in the box is a stable consensus.
pub fn find_truncation_constant(
    spec: &ProtocolSpec,
    agent_bound: u32,
    packet_cap: PacketCap,
    max_nodes: usize,
) -> Result<TruncationReport> {
    let configs = agent_box(spec, agent_bound);
    let g = stable_map(spec, &configs, GraphLimits::new(packet_cap).with_max_nodes(max_nodes))?;
    let unstable: Vec<&MultiConfig> = configs.iter().filter(|c| !is_stable(&g, c)).collect();
    let minimal: Vec<MultiConfig> = unstable
        .iter()
        .filter(|c| !unstable.iter().any(|d| d != *c && d.covered_by(c)))
        .map(|c| (*c).clone())
        .collect();
    let top = minimal
        .iter()
        .flat_map(|c| c.states.iter().chain(&c.messages))
        .copied()
        .max()
        .unwrap_or(0);
    Ok(TruncationReport {
        k: top + 1,
        minimal,
        configs: configs.len(),
        capped: g.capped(),
    })
}

/// A stable consensus that stops being one when an agent joins state `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationViolation {
    pub config: MultiConfig,
    pub state: StateId,
}

/// Checks every stable consensus `c` with fewer than `agent_bound` agents and
/// every state `q` holding at least `k` of them: `c` plus an agent in `q`
/// must again be a stable consensus. Returns the first failure.
pub fn check_truncatable_at(
    spec: &ProtocolSpec,
    k: u32,
    agent_bound: u32,
    packet_cap: PacketCap,
    max_nodes: usize,
) -> Result<Option<TruncationViolation>> {
    let configs = agent_box(spec, agent_bound);
    let g = stable_map(spec, &configs, GraphLimits::new(packet_cap).with_max_nodes(max_nodes))?;
    for c in configs.iter().filter(|c| c.agents() < agent_bound && is_stable(&g, c)) {
        for q in spec.state_ids().filter(|q| c.count(*q) >= k) {
            if !is_stable(&g, &c.with_agent(q)) {
                return Ok(Some(TruncationViolation {
                    config: c.clone(),
                    state: q,
                }));
            }
        }
    }
    Ok(None)
}
