//! Fully asynchronous protocols, in-degree and abundance sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::One;

use crate::config::{MultiConfig, StepSchema};
use crate::error::{Error, Result};
use crate::protocol::{MessageId, PacketCap, ProtocolSpec, Transitions, Violation};
use crate::step::successors;

/// A configuration on which every schema of the protocol is enabled: two
/// agents per state and, per message, as many packets as one step consumes.
fn generating_config(spec: &ProtocolSpec) -> MultiConfig {
    let mut per_message = 1;
    if let Transitions::Custom(schemas) = &spec.transitions {
        for s in schemas {
            let mut counts: BTreeMap<MessageId, u32> = BTreeMap::new();
            for m in &s.consumed {
                *counts.entry(*m).or_default() += 1;
            }
            per_message = per_message.max(counts.values().copied().max().unwrap_or(0));
        }
    }
    MultiConfig::from_counts(
        alloc::vec![2; spec.num_states()],
        alloc::vec![per_message; spec.num_messages()],
    )
}

/// Reliable step schemas of the protocol.
pub fn step_schemas(spec: &ProtocolSpec) -> BTreeSet<StepSchema> {
    successors(spec, &generating_config(spec), PacketCap::Unbounded)
        .steps
        .into_iter()
        .map(|(s, _)| s)
        .collect()
}

fn describe(spec: &ProtocolSpec, s: &StepSchema) -> alloc::string::String {
    let pairs = |v: &[(crate::protocol::StateId, crate::protocol::StateId)]| -> Vec<alloc::string::String> {
        v.iter()
            .map(|(a, b)| format!("{}->{}", spec.state_name(*a), spec.state_name(*b)))
            .collect()
    };
    let msgs = |v: &[MessageId]| -> Vec<&str> { v.iter().map(|m| spec.message_name(*m)).collect() };
    format!(
        "active [{}] passive [{}] consumes [{}] produces [{}]",
        pairs(&s.active).join(" "),
        pairs(&s.passive).join(" "),
        msgs(&s.consumed).join(" "),
        msgs(&s.produced).join(" ")
    )
}

/// Violations of the three conditions, one per offending schema and
/// condition. Empty means fully asynchronous.
pub fn is_fully_asynchronous(spec: &ProtocolSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in step_schemas(spec) {
        if s.active.len() != 1 {
            out.push(Violation {
                condition: "single active agent",
                detail: describe(spec, &s),
            });
        }
        if !s.passive.is_empty() {
            out.push(Violation {
                condition: "passive agents keep their states",
                detail: describe(spec, &s),
            });
        }
        if !s.consumed.is_empty() && !s.produced.is_empty() {
            out.push(Violation {
                condition: "packets are only sent or only consumed",
                detail: describe(spec, &s),
            });
        }
    }
    out
}

/// Largest number of packets a single step consumes.
pub fn in_degree(spec: &ProtocolSpec) -> Result<usize> {
    if let Some(v) = is_fully_asynchronous(spec).into_iter().next() {
        return Err(Error::Precondition(format!(
            "protocol is not fully asynchronous ({}: {})",
            v.condition, v.detail
        )));
    }
    Ok(step_schemas(spec).iter().map(|s| s.consumed.len()).max().unwrap_or(0))
}

/// The sizes `F` is evaluated at: `|Q|`, `|M|` and the in-degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbundanceParams {
    pub states: usize,
    pub messages: usize,
    pub in_degree: usize,
}

impl AbundanceParams {
    pub fn of(spec: &ProtocolSpec) -> Result<Self> {
        Ok(AbundanceParams {
            states: spec.num_states(),
            messages: spec.num_messages(),
            in_degree: in_degree(spec)?,
        })
    }
}

/// Supply threshold for an abundance set of size `k`.
pub trait ThresholdF {
    fn threshold(&self, params: AbundanceParams, k: usize) -> BigUint;
}

/// `(16(xyz+1))^(32(xyz+1) - 2k)`, and 1 once the exponent is not positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FullF;

impl ThresholdF for FullF {
    fn threshold(&self, p: AbundanceParams, k: usize) -> BigUint {
        let xyz1 = BigUint::from(p.states) * p.messages * p.in_degree + 1u32;
        let base = xyz1.clone() * 16u32;
        let exponent = xyz1 * 32u32;
        let twice_k = BigUint::from(k) * 2u32;
        if exponent <= twice_k {
            return BigUint::one();
        }
        let e: u32 = (exponent - twice_k).try_into().expect("exponent fits in u32");
        base.pow(e)
    }
}

/// `max(a - b*k, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyF {
    pub a: u64,
    pub b: u64,
}

impl ThresholdF for ToyF {
    fn threshold(&self, _: AbundanceParams, k: usize) -> BigUint {
        BigUint::from(self.a.saturating_sub(self.b.saturating_mul(k as u64)))
    }
}

fn check_monotone(f: &dyn ThresholdF, params: AbundanceParams) -> Result<()> {
    for k in 0..params.messages {
        if f.threshold(params, k + 1) > f.threshold(params, k) {
            return Err(Error::NonMonotoneThreshold { k });
        }
    }
    Ok(())
}

fn meets(c: &MultiConfig, m: MessageId, t: &BigUint) -> bool {
    BigUint::from(c.supply(m)) >= *t
}

/// Largest set of messages whose supplies all reach `F` at the set's size.
pub fn abundance_set(c: &MultiConfig, params: AbundanceParams, f: &dyn ThresholdF) -> Result<BTreeSet<MessageId>> {
    check_monotone(f, params)?;
    let mut set: BTreeSet<MessageId> = (0..c.messages.len() as u32).map(MessageId).collect();
    loop {
        let t = f.threshold(params, set.len());
        let before = set.len();
        set.retain(|m| meets(c, *m, &t));
        if set.len() == before {
            return Ok(set);
        }
    }
}

/// Whether every message of `set` has supply at least `F(|set|)` in `c`.
pub fn is_abundant_together(
    c: &MultiConfig,
    set: &BTreeSet<MessageId>,
    params: AbundanceParams,
    f: &dyn ThresholdF,
) -> bool {
    let t = f.threshold(params, set.len());
    set.iter().all(|m| meets(c, *m, &t))
}

/// Expendable messages along an execution: the union of the abundance sets
/// of every configuration seen so far.
pub struct AbundanceState<'f> {
    pub expendable: BTreeSet<MessageId>,
    pub params: AbundanceParams,
    pub f: &'f dyn ThresholdF,
}

impl<'f> AbundanceState<'f> {
    pub fn new(params: AbundanceParams, f: &'f dyn ThresholdF) -> Result<Self> {
        check_monotone(f, params)?;
        Ok(AbundanceState {
            expendable: BTreeSet::new(),
            params,
            f,
        })
    }

    /// Adds the abundance set of `c`; returns the newly expendable messages.
    pub fn observe(&mut self, c: &MultiConfig) -> Result<BTreeSet<MessageId>> {
        let fresh: BTreeSet<MessageId> = abundance_set(c, self.params, self.f)?
            .difference(&self.expendable)
            .copied()
            .collect();
        self.expendable.extend(fresh.iter().copied());
        Ok(fresh)
    }

    pub fn is_expendable(&self, m: MessageId) -> bool {
        self.expendable.contains(&m)
    }
}
