//! Bounded verification of predicate implementation and well-specification.
//!
//! On a finite graph every fair execution ends up touring one reachable
//! terminal SCC, so a protocol implements `phi` on input `x` exactly when
//! every terminal SCC reachable from `I(x)` is a consensus on `phi(x)`.
//!
//! Under a packet cap some SCCs are terminal only because the cap hides
//! their exits. Those are skipped, and an input with nothing else left is
//! reported as inconclusive.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{compositions, IdConfig};
use crate::error::{Error, Result};
use crate::fairness::lasso_along;
use crate::graph::{build_reach_graph, GraphLimits, ReachGraph};
use crate::predicate::CountingPredicate;
use crate::protocol::{PacketCap, ProtocolSpec};
use crate::step::{input_config, Output};
use crate::trace::ExecutionTrace;

/// Expected output per input vector.
pub trait Expectation {
    fn arity(&self) -> usize;
    fn expected(&self, x: &[u32]) -> Result<bool>;
}

impl Expectation for CountingPredicate {
    fn arity(&self) -> usize {
        self.arity
    }

    fn expected(&self, x: &[u32]) -> Result<bool> {
        self.eval(x)
    }
}

/// Explicit expected values, for behaviours no counting predicate describes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueTable {
    pub arity: usize,
    pub entries: BTreeMap<Vec<u32>, bool>,
}

impl Expectation for ValueTable {
    fn arity(&self) -> usize {
        self.arity
    }

    fn expected(&self, x: &[u32]) -> Result<bool> {
        self.entries
            .get(x)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("value table has no entry for {x:?}")))
    }
}

/// Expectation given by a function.
pub struct FnExpectation<F> {
    pub arity: usize,
    pub f: F,
}

impl<F: Fn(&[u32]) -> bool> Expectation for FnExpectation<F> {
    fn arity(&self) -> usize {
        self.arity
    }

    fn expected(&self, x: &[u32]) -> Result<bool> {
        Ok((self.f)(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub max_agents: u32,
    pub packet_cap: PacketCap,
    pub max_nodes: usize,
}

impl VerifyOptions {
    pub fn new(max_agents: u32, packet_cap: PacketCap) -> Self {
        VerifyOptions {
            max_agents,
            packet_cap,
            max_nodes: GraphLimits::DEFAULT_MAX_NODES,
        }
    }

    fn limits(&self) -> GraphLimits {
        GraphLimits::new(self.packet_cap).with_max_nodes(self.max_nodes)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputResult {
    pub input: Vec<u32>,
    pub expected: bool,
    pub passed: bool,
    pub nodes: usize,
    pub capped: bool,
    /// Every reachable terminal SCC is a cap artifact.
    pub inconclusive: bool,
}

/// A fair lasso from `I(input)` that settles in a bad terminal SCC.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub input: Vec<u32>,
    pub trace: ExecutionTrace,
    /// Consensus value of the terminal SCC, `None` if it is not a consensus.
    pub settles_on: Option<bool>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub results: Vec<InputResult>,
    pub counterexample: Option<Counterexample>,
    /// Some exploration hit the packet cap.
    pub capped: bool,
    /// The protocol creates packets and was explored under a finite cap.
    pub bounded_packets: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed && !r.inconclusive)
    }

    pub fn label(&self) -> &'static str {
        if self.bounded_packets {
            "bounded-packets approximation"
        } else {
            "exact up to the agent bound"
        }
    }
}

/// Inputs with `1 <= |x| <= max_agents`, by size and then lexicographically.
pub fn inputs(arity: usize, max_agents: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for n in 1..=max_agents {
        out.extend(compositions(n, arity));
    }
    out
}

/// Smallest-index node of a settled terminal SCC whose output is not `want`.
fn first_bad_terminal(g: &ReachGraph, want: Option<bool>) -> Option<usize> {
    (0..g.len()).find(|u| {
        g.is_settled_node(*u)
            && match want {
                Some(b) => g.output(*u) != Output::Consensus(b),
                None => g.output(*u) == Output::Mixed,
            }
    })
}

fn counterexample(
    spec: &ProtocolSpec,
    g: &ReachGraph,
    x: &[u32],
    bad: usize,
    cap: PacketCap,
    reason: String,
) -> Result<Counterexample> {
    let init = IdConfig::from_multi(g.node(0));
    let trace = lasso_along(spec, g, &init, &g.path_to(bad), cap)?;
    let members = g.scc_members(g.scc_of(bad));
    let first = g.output(members[0]);
    let settles_on = members
        .iter()
        .all(|m| g.output(*m) == first)
        .then(|| first.value())
        .flatten();
    Ok(Counterexample {
        input: x.to_vec(),
        trace,
        settles_on,
        reason,
    })
}

/// Checks every input up to the agent bound against `expected`.
pub fn verify_implements(spec: &ProtocolSpec, expected: &dyn Expectation, opts: VerifyOptions) -> Result<VerifyReport> {
    if expected.arity() != spec.sigma.len() {
        return Err(Error::Arity {
            expected: spec.sigma.len(),
            got: expected.arity(),
        });
    }
    let mut report = VerifyReport {
        results: Vec::new(),
        counterexample: None,
        capped: false,
        bounded_packets: spec.produces_packets() && opts.packet_cap.is_finite(),
    };
    for x in inputs(spec.sigma.len(), opts.max_agents) {
        let want = expected.expected(&x)?;
        let g = build_reach_graph(spec, &input_config(spec, &x)?, opts.limits())?;
        let bad = first_bad_terminal(&g, Some(want));
        report.capped |= g.capped();
        report.results.push(InputResult {
            input: x.clone(),
            expected: want,
            passed: bad.is_none(),
            nodes: g.len(),
            capped: g.capped(),
            inconclusive: !(0..g.len()).any(|u| g.is_settled_node(u)),
        });
        if let (Some(bad), None) = (bad, &report.counterexample) {
            let reason = format!("a reachable terminal SCC does not agree on {want}");
            report.counterexample = Some(counterexample(spec, &g, &x, bad, opts.packet_cap, reason)?);
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellSpecReport {
    /// Induced values, complete when the protocol is well-specified at the bound.
    pub table: ValueTable,
    pub witness: Option<Counterexample>,
    /// Inputs whose every terminal SCC is a cap artifact.
    pub inconclusive: Vec<Vec<u32>>,
    pub capped: bool,
    pub bounded_packets: bool,
}

impl WellSpecReport {
    pub fn well_specified(&self) -> bool {
        self.witness.is_none()
    }
}

/// Whether every input up to the bound settles on a single consensus value.
pub fn is_well_specified(spec: &ProtocolSpec, opts: VerifyOptions) -> Result<WellSpecReport> {
    let mut report = WellSpecReport {
        table: ValueTable {
            arity: spec.sigma.len(),
            entries: BTreeMap::new(),
        },
        witness: None,
        inconclusive: Vec::new(),
        capped: false,
        bounded_packets: spec.produces_packets() && opts.packet_cap.is_finite(),
    };
    for x in inputs(spec.sigma.len(), opts.max_agents) {
        let g = build_reach_graph(spec, &input_config(spec, &x)?, opts.limits())?;
        report.capped |= g.capped();
        let mut value = None;
        let mut bad =
            first_bad_terminal(&g, None).map(|u| (u, String::from("a reachable terminal SCC is not a consensus")));
        if bad.is_none() {
            for u in (0..g.len()).filter(|u| g.is_settled_node(*u)) {
                let v = g.output(u).value();
                match value {
                    None => value = v,
                    Some(b) if v != Some(b) => {
                        bad = Some((u, format!("terminal SCCs settle on both {b} and {}", !b)));
                        break;
                    }
                    _ => {}
                }
            }
        }
        match bad {
            Some((u, reason)) => {
                report.witness = Some(counterexample(spec, &g, &x, u, opts.packet_cap, reason)?);
                return Ok(report);
            }
            None => match value {
                Some(v) => {
                    report.table.entries.insert(x, v);
                }
                None => report.inconclusive.push(x),
            },
        }
    }
    Ok(report)
}

/// Whether every schedule that only stutters while no changing step is
/// available ends in a consensus on `want`: the graph may have no cycles
/// besides self-loops, and every configuration without a changing step
/// must be a consensus on `want`.
pub fn converges_under_activity(spec: &ProtocolSpec, x: &[u32], want: bool, limits: GraphLimits) -> Result<bool> {
    let g = build_reach_graph(spec, &input_config(spec, x)?, limits)?;
    let acyclic = (0..g.scc_count()).all(|s| g.scc_members(s).len() == 1);
    let sinks_ok = (0..g.len())
        .filter(|u| g.successors_of(*u).all(|v| v == *u))
        .all(|u| g.output(u) == Output::Consensus(want));
    Ok(acyclic && sinks_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::trace::validate_trace;

    #[test]
    fn equality_pp_implements_phi() {
        let r = verify_implements(
            &corpus::eq_pp(),
            &corpus::equality_predicate(),
            VerifyOptions::new(4, PacketCap::Finite(0)),
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.results.len(), 2 + 3 + 4 + 5);
        assert!(!r.bounded_packets);
    }

    #[test]
    fn queued_results_are_labelled() {
        let r = verify_implements(
            &corpus::eq_qt(),
            &corpus::equality_predicate(),
            VerifyOptions::new(2, PacketCap::Finite(2)),
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.label(), "bounded-packets approximation");
    }

    #[test]
    fn unreliable_parity_fails_with_a_trace() {
        let spec = corpus::parity().with_unreliable(true);
        let r = verify_implements(
            &spec,
            &corpus::parity_table(2),
            VerifyOptions::new(2, PacketCap::Finite(0)),
        )
        .unwrap();
        assert!(!r.passed());
        let cex = r.counterexample.unwrap();
        assert_eq!(cex.input, alloc::vec![2]);
        assert_eq!(cex.settles_on, Some(false));
        validate_trace(&spec, &cex.trace, PacketCap::Finite(0)).unwrap();
    }

    #[test]
    fn queued_attempt_passes_despite_the_cap() {
        let e = corpus::builtin("qt_atleast2").unwrap();
        let Some(corpus::Expected::Predicate(p)) = &e.expected else {
            panic!("predicate expected");
        };
        let r = verify_implements(&e.spec, p, VerifyOptions::new(e.bound, e.packet_cap)).unwrap();
        assert!(r.passed());
        assert!(r.capped);
    }

    #[test]
    fn reliable_parity_passes() {
        let r = verify_implements(
            &corpus::parity(),
            &corpus::parity_table(5),
            VerifyOptions::new(5, PacketCap::Finite(0)),
        )
        .unwrap();
        assert!(r.passed());
    }

    #[test]
    fn closures_work_as_expectations() {
        let even = FnExpectation {
            arity: 1,
            f: |x: &[u32]| x[0].is_multiple_of(2),
        };
        assert!(
            verify_implements(&corpus::parity(), &even, VerifyOptions::new(4, PacketCap::Finite(0)))
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn well_specified_round_trip() {
        let opts = VerifyOptions::new(4, PacketCap::Finite(0));
        let w = is_well_specified(&corpus::eq_pp(), opts).unwrap();
        assert!(w.well_specified());
        let phi = corpus::equality_predicate();
        for (x, v) in &w.table.entries {
            assert_eq!(phi.eval(x).unwrap(), *v);
        }
        assert!(verify_implements(&corpus::eq_pp(), &w.table, opts).unwrap().passed());
    }

    #[test]
    fn unreliable_parity_is_not_well_specified() {
        let spec = corpus::parity().with_unreliable(true);
        let w = is_well_specified(&spec, VerifyOptions::new(2, PacketCap::Finite(0))).unwrap();
        assert_eq!(w.witness.unwrap().input, alloc::vec![2]);
    }

    #[test]
    fn protocol_without_transitions() {
        let mut spec = corpus::eq_pp();
        spec.transitions = crate::protocol::Transitions::Pairwise(alloc::vec![]);
        let opts = VerifyOptions::new(3, PacketCap::Finite(0));
        // Both input states output true.
        assert!(is_well_specified(&spec, opts).unwrap().well_specified());
        spec.output_map = alloc::vec![true, false, false];
        let w = is_well_specified(&spec, opts).unwrap();
        assert_eq!(w.witness.unwrap().input, alloc::vec![1, 1]);
    }

    #[test]
    fn arity_mismatch() {
        let p = CountingPredicate::always(1, true);
        assert!(matches!(
            verify_implements(&corpus::eq_pp(), &p, VerifyOptions::new(2, PacketCap::Finite(0))),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn synthesized_threshold_converges_under_activity() {
        let spec = corpus::builtin("threshold(3)").unwrap().spec;
        for n in 1..=5 {
            assert!(converges_under_activity(&spec, &[n], n >= 3, GraphLimits::new(PacketCap::Finite(0))).unwrap());
        }
    }
}
