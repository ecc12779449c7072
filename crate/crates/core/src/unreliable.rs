//! Message-loss semantics.
//!
//! For a base step `C -A-> C'` the admissible lossy results `C''` keep the
//! agents and the packets of `C'`, give every agent either its old or its new
//! state, and either freeze all passive agents or update all active ones.
//! The transform is applied once, to base steps only.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::config::{AgentId, IdConfig, MultiConfig, StepInstance, StepSchema};
use crate::error::{Error, Result};
use crate::protocol::{PacketCap, ProtocolSpec, StateId};
use crate::step::{id_successors, successors, Successors};

/// One admissible lossy post-configuration, tagged with the reliance
/// disjuncts it satisfies. Both tags may hold at once.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Variant {
    pub post: IdConfig,
    /// Every passive agent kept its old state.
    pub passive_kept: bool,
    /// Every active agent took its new state.
    pub active_updated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnreliableVariantSet {
    pub base: StepInstance,
    pub variants: Vec<Variant>,
}

impl UnreliableVariantSet {
    pub fn posts(&self) -> BTreeSet<IdConfig> {
        self.variants.iter().map(|v| v.post.clone()).collect()
    }

    pub fn contains(&self, post: &IdConfig) -> bool {
        self.variants.iter().any(|v| &v.post == post)
    }
}

fn check_step(step: &StepInstance) -> Result<()> {
    if !step.conserves_agents() || step.active.iter().any(|a| !step.pre.agents.contains_key(a)) {
        return Err(Error::AgentConservation);
    }
    Ok(())
}

fn reliance(step: &StepInstance, post: &IdConfig) -> (bool, bool) {
    let mut passive_kept = true;
    let mut active_updated = true;
    for (a, q) in &post.agents {
        if step.active.contains(a) {
            active_updated &= step.post.agents.get(a) == Some(q);
        } else {
            passive_kept &= step.pre.agents.get(a) == Some(q);
        }
    }
    (passive_kept, active_updated)
}

/// Every admissible lossy variant of a base step, deduplicated.
pub fn unreliable_variants(step: &StepInstance) -> Result<UnreliableVariantSet> {
    check_step(step)?;
    let changers: Vec<(AgentId, StateId)> = step
        .post
        .agents
        .iter()
        .filter(|(a, q)| step.pre.agents.get(a) != Some(*q))
        .map(|(a, q)| (*a, *q))
        .collect();
    let mut variants = BTreeSet::new();
    for mask in 0u64..(1u64 << changers.len()) {
        let mut agents = step.pre.agents.clone();
        for (i, (a, q)) in changers.iter().enumerate() {
            if mask & (1 << i) != 0 {
                agents.insert(*a, *q);
            }
        }
        let post = IdConfig {
            agents,
            packets: step.post.packets.clone(),
        };
        let (passive_kept, active_updated) = reliance(step, &post);
        if passive_kept || active_updated {
            variants.insert(Variant {
                post,
                passive_kept,
                active_updated,
            });
        }
    }
    Ok(UnreliableVariantSet {
        base: step.clone(),
        variants: variants.into_iter().collect(),
    })
}

/// Checks the four conditions for `candidate` against a base step.
pub fn is_unreliable_variant(base: &StepInstance, candidate: &IdConfig) -> bool {
    if check_step(base).is_err() {
        return false;
    }
    if !candidate.agents.keys().eq(base.post.agents.keys()) || candidate.packets != base.post.packets {
        return false;
    }
    let states_ok = candidate
        .agents
        .iter()
        .all(|(a, q)| base.pre.agents.get(a) == Some(q) || base.post.agents.get(a) == Some(q));
    let (passive_kept, active_updated) = reliance(base, candidate);
    states_ok && (passive_kept || active_updated)
}

/// Anonymous counterpart of [`unreliable_variants`] for a schema enabled at `c`.
pub fn variant_schemas(spec: &ProtocolSpec, schema: &StepSchema, c: &MultiConfig) -> Vec<(StepSchema, MultiConfig)> {
    let mut active_fixed = Vec::new();
    let mut active_groups: BTreeMap<(StateId, StateId), u32> = BTreeMap::new();
    for &(a, b) in &schema.active {
        if a == b {
            active_fixed.push((a, b));
        } else {
            *active_groups.entry((a, b)).or_default() += 1;
        }
    }
    let mut passive_groups: BTreeMap<(StateId, StateId), u32> = BTreeMap::new();
    for &(a, b) in &schema.passive {
        *passive_groups.entry((a, b)).or_default() += 1;
    }
    let active_groups: Vec<_> = active_groups.into_iter().collect();
    let passive_groups: Vec<_> = passive_groups.into_iter().collect();
    let active_full: u32 = active_groups.iter().map(|(_, n)| n).sum();

    let mut out = BTreeSet::new();
    for a_choice in counts_upto(&active_groups) {
        let all_active = a_choice.iter().sum::<u32>() == active_full;
        for p_choice in counts_upto(&passive_groups) {
            let no_passive = p_choice.iter().all(|n| *n == 0);
            if !(no_passive || all_active) {
                continue;
            }
            let mut v = StepSchema {
                active: active_fixed.clone(),
                passive: Vec::new(),
                consumed: schema.consumed.clone(),
                produced: schema.produced.clone(),
            };
            for (((from, to), n), k) in active_groups.iter().zip(&a_choice) {
                for i in 0..*n {
                    v.active.push(if i < *k { (*from, *to) } else { (*from, *from) });
                }
            }
            for (((from, to), _), k) in passive_groups.iter().zip(&p_choice) {
                for _ in 0..*k {
                    v.passive.push((*from, *to));
                }
            }
            let v = v.canonical();
            if let Some(next) = v.apply(spec, c) {
                out.insert((v, next));
            }
        }
    }
    out.into_iter().collect()
}

/// For groups with multiplicities `n_i`, every vector `k` with `0 <= k_i <= n_i`.
fn counts_upto<T>(groups: &[(T, u32)]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for (_, n) in groups {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=*n).map(move |k| {
                    let mut p = prefix.clone();
                    p.push(k);
                    p
                })
            })
            .collect();
    }
    out
}

/// Successors under the protocol's semantics: every lossy variant of every
/// reliable step when `spec.unreliable` is set, the reliable steps otherwise.
pub fn unreliable_successors(spec: &ProtocolSpec, c: &MultiConfig, cap: PacketCap) -> Successors {
    let base = successors(spec, c, cap);
    if !spec.unreliable {
        return base;
    }
    let mut out = BTreeSet::new();
    for (schema, _) in &base.steps {
        out.extend(variant_schemas(spec, schema, c));
    }
    Successors {
        steps: out.into_iter().collect(),
        capped: base.capped,
    }
}

/// Identified steps under the protocol's semantics, deduplicated.
pub fn engine_id_steps(spec: &ProtocolSpec, c: &IdConfig, cap: PacketCap) -> Vec<StepInstance> {
    let base = id_successors(spec, c, cap);
    if !spec.unreliable {
        return base;
    }
    let mut out = BTreeSet::new();
    for step in &base {
        let set = unreliable_variants(step).expect("base steps conserve agents");
        for v in set.variants {
            out.insert(StepInstance {
                pre: step.pre.clone(),
                active: step.active.clone(),
                post: v.post,
            });
        }
    }
    out.into_iter().collect()
}

/// Whether `pre -active-> post` is a step under the protocol's semantics.
pub fn is_engine_step(
    spec: &ProtocolSpec,
    pre: &IdConfig,
    active: &BTreeSet<AgentId>,
    post: &IdConfig,
    cap: PacketCap,
) -> bool {
    engine_id_steps(spec, pre, cap)
        .iter()
        .any(|s| &s.active == active && &s.post == post)
}
