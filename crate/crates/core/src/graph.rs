//! Finite reachability graphs over anonymous configurations.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{MultiConfig, StepSchema};
use crate::error::{Error, Result};
use crate::protocol::{PacketCap, ProtocolSpec};
use crate::step::{output_of, Output};
use crate::unreliable::unreliable_successors;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphLimits {
    pub packet_cap: PacketCap,
    pub max_nodes: usize,
}

impl GraphLimits {
    pub const DEFAULT_MAX_NODES: usize = 1_000_000;

    pub fn new(packet_cap: PacketCap) -> Self {
        GraphLimits {
            packet_cap,
            max_nodes: Self::DEFAULT_MAX_NODES,
        }
    }

    pub fn with_max_nodes(self, max_nodes: usize) -> Self {
        GraphLimits { max_nodes, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub schema: StepSchema,
    pub to: usize,
}

/// Closure of one or more roots under the protocol's successor relation.
///
/// Nodes are numbered in breadth-first discovery order, and every node's
/// first discoverer is kept as its parent, so [`ReachGraph::path_to`] returns
/// the shortest path that is smallest in discovery order.
#[derive(Clone, Debug)]
pub struct ReachGraph {
    nodes: Vec<MultiConfig>,
    index: BTreeMap<MultiConfig, usize>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    scc_of: Vec<usize>,
    scc_members: Vec<Vec<usize>>,
    terminal: Vec<bool>,
    stable: Vec<Option<bool>>,
    outputs: Vec<Output>,
    /// Agent-state vectors of the steps the cap hid, per node.
    escapes: Vec<Vec<Vec<u32>>>,
    capped: bool,
}

/// Builds the reachability graph from `init`.
pub fn build_reach_graph(spec: &ProtocolSpec, init: &MultiConfig, limits: GraphLimits) -> Result<ReachGraph> {
    build_reach_graph_from(spec, core::slice::from_ref(init), limits)
}

/// Builds the joint reachability graph from several roots.
pub fn build_reach_graph_from(spec: &ProtocolSpec, roots: &[MultiConfig], limits: GraphLimits) -> Result<ReachGraph> {
    if spec.produces_packets() && !limits.packet_cap.is_finite() {
        return Err(Error::UnboundedPackets(spec.name.clone()));
    }
    let mut g = ReachGraph {
        nodes: Vec::new(),
        index: BTreeMap::new(),
        edges: Vec::new(),
        out: Vec::new(),
        parent: Vec::new(),
        scc_of: Vec::new(),
        scc_members: Vec::new(),
        terminal: Vec::new(),
        stable: Vec::new(),
        outputs: Vec::new(),
        escapes: Vec::new(),
        capped: false,
    };
    let mut queue = VecDeque::new();
    for r in roots {
        if !g.index.contains_key(r) {
            let id = g.add_node(spec, r.clone(), None);
            queue.push_back(id);
        }
    }
    while let Some(u) = queue.pop_front() {
        let succ = unreliable_successors(spec, &g.nodes[u], limits.packet_cap);
        g.capped |= succ.capped;
        if succ.capped {
            let kept = succ.configs();
            let mut escapes: Vec<Vec<u32>> = unreliable_successors(spec, &g.nodes[u], PacketCap::Unbounded)
                .configs()
                .into_iter()
                .filter(|c| !kept.contains(c))
                .map(|c| c.states)
                .collect();
            escapes.dedup();
            g.escapes[u] = escapes;
        }
        let mut seen_targets = BTreeSet::new();
        for (schema, next) in succ.steps {
            let v = match g.index.get(&next) {
                Some(&v) => v,
                None => {
                    if g.nodes.len() >= limits.max_nodes {
                        return Err(Error::NodeBudget {
                            limit: limits.max_nodes,
                            explored: g.nodes.len(),
                            frontier: queue.len() + 1,
                        });
                    }
                    let v = g.add_node(spec, next, Some(u));
                    queue.push_back(v);
                    v
                }
            };
            if seen_targets.insert((v, schema.clone())) {
                g.out[u].push(g.edges.len());
                g.edges.push(Edge { from: u, schema, to: v });
            }
        }
    }
    g.compute_sccs();
    Ok(g)
}

impl ReachGraph {
    fn add_node(&mut self, spec: &ProtocolSpec, c: MultiConfig, parent: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.outputs.push(output_of(spec, &c));
        self.escapes.push(Vec::new());
        self.index.insert(c.clone(), id);
        self.nodes.push(c);
        self.out.push(Vec::new());
        self.parent.push(parent);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MultiConfig] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &MultiConfig {
        &self.nodes[id]
    }

    pub fn node_id(&self, c: &MultiConfig) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = &Edge> {
        self.out[u].iter().map(move |e| &self.edges[*e])
    }

    pub fn successors_of(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.out_edges(u).map(|e| e.to)
    }

    pub fn output(&self, u: usize) -> Output {
        self.outputs[u]
    }

    /// Some packet-producing step was suppressed by the cap.
    pub fn capped(&self) -> bool {
        self.capped
    }

    /// The cap hid some packet-producing step out of `u`.
    pub fn suppressed(&self, u: usize) -> bool {
        !self.escapes[u].is_empty()
    }

    /// A terminal SCC only because the cap hid a step that would move the
    /// agents to a state multiset the SCC never shows. Without the cap the
    /// protocol could leave it, so it says nothing about fair behaviour.
    pub fn is_cap_artifact(&self, scc: usize) -> bool {
        if !self.terminal[scc] {
            return false;
        }
        let members = &self.scc_members[scc];
        let inside: BTreeSet<&[u32]> = members.iter().map(|u| self.nodes[*u].states.as_slice()).collect();
        members
            .iter()
            .flat_map(|u| &self.escapes[*u])
            .any(|e| !inside.contains(e.as_slice()))
    }

    /// Terminal and not a cap artifact.
    pub fn is_settled_node(&self, u: usize) -> bool {
        let s = self.scc_of[u];
        self.terminal[s] && !self.is_cap_artifact(s)
    }

    pub fn scc_of(&self, u: usize) -> usize {
        self.scc_of[u]
    }

    pub fn scc_count(&self) -> usize {
        self.scc_members.len()
    }

    pub fn scc_members(&self, scc: usize) -> &[usize] {
        &self.scc_members[scc]
    }

    pub fn is_terminal_scc(&self, scc: usize) -> bool {
        self.terminal[scc]
    }

    pub fn is_terminal_node(&self, u: usize) -> bool {
        self.terminal[self.scc_of[u]]
    }

    /// Value `b` if every configuration reachable from `u` is a consensus on `b`.
    pub fn stable_consensus_value(&self, u: usize) -> Option<bool> {
        self.stable[u]
    }

    /// [`Self::stable_consensus_value`], unless a step hidden by the cap
    /// somewhere below `u` would move the agents to a state multiset never
    /// reached from `u`.
    pub fn cap_free_stable_value(&self, u: usize) -> Option<bool> {
        let value = self.stable[u]?;
        let below = self.reachable_from(u);
        let inside: BTreeSet<&[u32]> = below.iter().map(|v| self.nodes[*v].states.as_slice()).collect();
        let leaks = below
            .iter()
            .flat_map(|v| &self.escapes[*v])
            .any(|e| !inside.contains(e.as_slice()));
        (!leaks).then_some(value)
    }

    /// Nodes reachable from `u`, including `u`, in discovery order.
    pub fn reachable_from(&self, u: usize) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut order = vec![u];
        seen[u] = true;
        let mut i = 0;
        while i < order.len() {
            let x = order[i];
            i += 1;
            for y in self.successors_of(x) {
                if !seen[y] {
                    seen[y] = true;
                    order.push(y);
                }
            }
        }
        order
    }

    /// Terminal SCCs reachable from `u`, ordered by their smallest node.
    pub fn terminal_sccs_from(&self, u: usize) -> Vec<usize> {
        let mut sccs: Vec<usize> = self
            .reachable_from(u)
            .into_iter()
            .map(|x| self.scc_of[x])
            .filter(|s| self.terminal[*s])
            .collect();
        sccs.sort_by_key(|s| self.scc_members[*s][0]);
        sccs.dedup();
        sccs
    }

    /// Breadth-first parent path from the root that discovered `target`.
    pub fn path_to(&self, target: usize) -> Vec<usize> {
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Shortest path from `from` to `to` inside the graph, if one exists,
    /// preferring edges in insertion order.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; self.nodes.len()];
        prev[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(x) = queue.pop_front() {
            if x == to {
                break;
            }
            for y in self.successors_of(x) {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        if prev[to] == usize::MAX {
            return None;
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// First edge from `u` to `v`.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<&Edge> {
        self.out_edges(u).find(|e| e.to == v)
    }

    /// Iterative Tarjan. SCCs come out sinks first, which is the order the
    /// stable-consensus values are propagated in.
    fn compute_sccs(&mut self) {
        let n = self.nodes.len();
        const UNSEEN: usize = usize::MAX;
        let mut index = vec![UNSEEN; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut scc_of = vec![UNSEEN; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut next_index = 0;

        for root in 0..n {
            if index[root] != UNSEEN {
                continue;
            }
            // (node, position in its out-edge list)
            let mut call: Vec<(usize, usize)> = vec![(root, 0)];
            index[root] = next_index;
            low[root] = next_index;
            next_index += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut pos)) = call.last_mut() {
                if *pos < self.out[v].len() {
                    let w = self.edges[self.out[v][*pos]].to;
                    *pos += 1;
                    if index[w] == UNSEEN {
                        index[w] = next_index;
                        low[w] = next_index;
                        next_index += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if let Some(&(parent, _)) = call.last() {
                        low[parent] = low[parent].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let id = members.len();
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack");
                            on_stack[w] = false;
                            scc_of[w] = id;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort();
                        members.push(comp);
                    }
                }
            }
        }

        let mut terminal = vec![true; members.len()];
        for e in &self.edges {
            if scc_of[e.from] != scc_of[e.to] {
                terminal[scc_of[e.from]] = false;
            }
        }

        // Successor SCCs are always finished before their predecessors.
        let mut scc_value: Vec<Option<bool>> = vec![None; members.len()];
        for (id, comp) in members.iter().enumerate() {
            let first = self.outputs[comp[0]].value();
            let mut value = first;
            for &u in comp {
                if self.outputs[u].value() != first {
                    value = None;
                }
                for w in self.successors_of(u) {
                    let s = scc_of[w];
                    if s != id && scc_value[s] != first {
                        value = None;
                    }
                }
            }
            scc_value[id] = value;
        }
        self.stable = (0..n).map(|u| scc_value[scc_of[u]]).collect();
        self.scc_of = scc_of;
        self.scc_members = members;
        self.terminal = terminal;
    }
}
