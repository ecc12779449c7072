use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::CountingPredicate;
use crate::error::{Error, Result};
use crate::protocol::{Fairness, Kind, PairRule, ProtocolSpec, StateId, Transitions};

/// One threshold counter for input coordinate `coord`, saturating at `cap`.
#[derive(Clone, Copy, Debug)]
struct Component {
    coord: usize,
    cap: u32,
    min: u32,
}

impl Component {
    fn values(&self) -> core::ops::RangeInclusive<u32> {
        self.min..=self.cap
    }

    /// New counter of an observer holding `k` that sees a counter `n`.
    fn observe(&self, k: u32, n: u32) -> u32 {
        if k == n && k >= 1 && k < self.cap {
            k + 1
        } else if n == self.cap && k < self.cap {
            self.cap
        } else {
            k
        }
    }
}

/// Compiles a counting predicate into an immediate observation protocol.
///
/// Every coordinate gets one counter per threshold `c` of the predicate.
/// An agent starts with counter 1 for its own input and 0 elsewhere; an
/// observer that sees its own value `k < c` moves to `k + 1`, and one that
/// sees `c` jumps to `c`. The protocol is the direct product of all
/// counters, and a state outputs the predicate evaluated at the largest
/// threshold each coordinate has reached.
pub fn synthesize_io_protocol(pred: &CountingPredicate) -> Result<ProtocolSpec> {
    let sigma: Vec<String> = (0..pred.arity).map(|i| i.to_string()).collect();
    synthesize_io_protocol_over(pred, &sigma)
}

/// [`synthesize_io_protocol`] with explicit names for the input symbols.
pub fn synthesize_io_protocol_over(pred: &CountingPredicate, sigma: &[String]) -> Result<ProtocolSpec> {
    if pred.arity == 0 {
        return Err(Error::Precondition("predicate arity must be positive".into()));
    }
    if sigma.len() != pred.arity {
        return Err(Error::Arity {
            expected: pred.arity,
            got: sigma.len(),
        });
    }
    let sigma = sigma.to_vec();
    let min = if pred.arity > 1 { 0 } else { 1 };
    let mut comps = Vec::new();
    for (coord, ts) in pred.thresholds().into_iter().enumerate() {
        for cap in ts {
            comps.push(Component { coord, cap, min });
        }
    }

    let mut tuples: Vec<Vec<u32>> = vec![Vec::new()];
    for c in &comps {
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                c.values().map(move |v| {
                    let mut t = t.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    let index = |t: &[u32]| -> StateId {
        StateId(tuples.iter().position(|u| u.as_slice() == t).expect("product state") as u32)
    };
    let states: Vec<String> = if comps.is_empty() {
        vec!["const".to_string()]
    } else {
        tuples
            .iter()
            .map(|t| t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("."))
            .collect()
    };

    let mut output_map = Vec::with_capacity(tuples.len());
    for t in &tuples {
        let mut x = vec![0; pred.arity];
        for (c, v) in comps.iter().zip(t) {
            if *v == c.cap {
                x[c.coord] = x[c.coord].max(c.cap);
            }
        }
        output_map.push(pred.eval(&x)?);
    }

    let input_map = (0..pred.arity)
        .map(|i| {
            let t: Vec<u32> = comps.iter().map(|c| if c.coord == i { 1 } else { 0 }).collect();
            index(&t)
        })
        .collect();

    let mut rules = Vec::new();
    for observed in &tuples {
        for observer in &tuples {
            let next: Vec<u32> = comps
                .iter()
                .zip(observer.iter().zip(observed))
                .map(|(c, (k, n))| c.observe(*k, *n))
                .collect();
            if &next != observer {
                rules.push(PairRule {
                    pre: (index(observed), index(observer)),
                    post: (index(observed), index(&next)),
                });
            }
        }
    }

    let name = match &pred.source {
        Some(src) => format!("synth({src})"),
        None => "synth".to_string(),
    };
    Ok(ProtocolSpec {
        name,
        kind: Kind::ImmediateObservation,
        sigma,
        states,
        messages: Vec::new(),
        input_map,
        output_map,
        transitions: Transitions::Pairwise(rules),
        unreliable: false,
        fairness: Fairness::Default,
    })
}
