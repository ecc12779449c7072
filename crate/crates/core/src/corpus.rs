//! Built-in protocols.
//!
//! The four equality protocols decide whether all agents share one input
//! symbol, each in a different protocol class. `threshold(c)` is synthesized
//! from `x0 >= c`. `parity` is a leader-election parity protocol that is
//! correct only without message loss, `plusminus` splits pairs into `q+` and
//! `q-`, and `qt_atleast2` is a queued-transmission attempt at detecting a
//! second agent.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::predicate::{parse_predicate, synthesize_io_protocol, CountingPredicate};
use crate::protocol::{
    BroadcastReceive, Fairness, Kind, MessageId, PacketCap, PairRule, ProtocolSpec, ReceiveRule, SendRule, StateId,
    Transitions,
};
use crate::verify::ValueTable;

pub const NAMES: [&str; 10] = [
    "eq_pp",
    "eq_io",
    "eq_qt",
    "eq_bcast",
    "threshold(1)",
    "threshold(2)",
    "threshold(3)",
    "parity",
    "plusminus",
    "qt_atleast2",
];

/// The equality predicate `x0 = 0 || x1 = 0`.
pub const EQUALITY: &str = "x0 = 0 || x1 = 0";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expected {
    Predicate(CountingPredicate),
    Table(ValueTable),
}

#[derive(Clone, Debug)]
pub struct BuiltinCorpusEntry {
    pub name: String,
    pub spec: ProtocolSpec,
    pub expected: Option<Expected>,
    /// Largest population the expectation is checked at.
    pub bound: u32,
    pub packet_cap: PacketCap,
    pub note: &'static str,
}

pub fn builtin(name: &str) -> Result<BuiltinCorpusEntry> {
    let entry = |spec: ProtocolSpec, expected, bound, packet_cap, note| BuiltinCorpusEntry {
        name: name.to_string(),
        spec,
        expected,
        bound,
        packet_cap,
        note,
    };
    let eq = || Some(Expected::Predicate(equality_predicate()));
    Ok(match name {
        "eq_pp" => entry(eq_pp(), eq(), 5, PacketCap::Finite(0), "equality, population protocol"),
        "eq_io" => entry(
            eq_io(),
            eq(),
            5,
            PacketCap::Finite(0),
            "equality, immediate observation",
        ),
        "eq_qt" => entry(eq_qt(), eq(), 5, PacketCap::Finite(4), "equality, queued transmission"),
        "eq_bcast" => entry(eq_bcast(), eq(), 5, PacketCap::Finite(0), "equality, broadcast"),
        "parity" => entry(
            parity(),
            Some(Expected::Table(parity_table(8))),
            5,
            PacketCap::Finite(0),
            "parity by leader merging; not a counting predicate",
        ),
        "plusminus" => entry(
            plusminus(),
            None,
            3,
            PacketCap::Finite(0),
            "single transition (q0,q0) -> (q+,q-); not shadow-permitting",
        ),
        "qt_atleast2" => entry(
            qt_atleast2(),
            Some(Expected::Predicate(single_symbol("x0 >= 1"))),
            3,
            PacketCap::Finite(3),
            "queued transmission attempt at x >= 2; cannot tell one agent from two",
        ),
        _ => {
            let c = name
                .strip_prefix("threshold(")
                .and_then(|s| s.strip_suffix(')'))
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| Error::UnknownBuiltin(name.to_string()))?;
            let pred = single_symbol(&alloc::format!("x0 >= {c}"));
            let mut spec = synthesize_io_protocol(&pred)?;
            spec.name = name.to_string();
            entry(
                spec,
                Some(Expected::Predicate(pred)),
                6,
                PacketCap::Finite(0),
                "synthesized immediate observation threshold",
            )
        }
    })
}

fn single_symbol(text: &str) -> CountingPredicate {
    parse_predicate(text, &["0".to_string()]).expect("built-in predicate parses")
}

pub fn equality_predicate() -> CountingPredicate {
    parse_predicate(EQUALITY, &["0".to_string(), "1".to_string()]).expect("built-in predicate parses")
}

fn s(i: u32) -> StateId {
    StateId(i)
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| (*s).to_owned()).collect()
}

fn equality_frame(name: &str, kind: Kind, messages: &[&str], transitions: Transitions) -> ProtocolSpec {
    ProtocolSpec {
        name: name.to_string(),
        kind,
        sigma: names(&["0", "1"]),
        states: names(&["q0", "q1", "q_bot"]),
        messages: names(messages),
        input_map: vec![s(0), s(1)],
        output_map: vec![true, true, false],
        transitions,
        unreliable: false,
        fairness: Fairness::Default,
    }
}

/// Two agents in different states both switch to `q_bot`.
pub fn eq_pp() -> ProtocolSpec {
    let mut rules = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                rules.push(PairRule {
                    pre: (s(a), s(b)),
                    post: (s(2), s(2)),
                });
            }
        }
    }
    equality_frame("eq_pp", Kind::Population, &[], Transitions::Pairwise(rules))
}

/// An agent that observes a different state switches to `q_bot`.
pub fn eq_io() -> ProtocolSpec {
    let mut rules = Vec::new();
    for observed in 0..3 {
        for observer in 0..2 {
            if observed != observer {
                rules.push(PairRule {
                    pre: (s(observed), s(observer)),
                    post: (s(observed), s(2)),
                });
            }
        }
    }
    equality_frame("eq_io", Kind::ImmediateObservation, &[], Transitions::Pairwise(rules))
}

/// Every agent sends its state; an agent in `q0` or `q1` that receives a
/// different one switches to `q_bot`.
pub fn eq_qt() -> ProtocolSpec {
    let send = (0..3)
        .map(|i| SendRule {
            from: s(i),
            to: s(i),
            message: MessageId(i),
        })
        .collect();
    let mut receive = Vec::new();
    for i in 0..2 {
        for m in 0..3 {
            receive.push(ReceiveRule {
                from: s(i),
                message: MessageId(m),
                to: if i == m { s(i) } else { s(2) },
            });
        }
    }
    equality_frame(
        "eq_qt",
        Kind::QueuedTransmission,
        &["m0", "m1", "m_bot"],
        Transitions::Messages { send, receive },
    )
}

/// A sender broadcasts its state and every agent in another state switches
/// to `q_bot`.
pub fn eq_bcast() -> ProtocolSpec {
    let send = (0..3).map(|i| (s(i), s(i))).collect();
    let mut receive = Vec::new();
    for receiver in 0..3 {
        for sender in 0..3 {
            receive.push(BroadcastReceive {
                receiver: s(receiver),
                sender: s(sender),
                to: if receiver == sender { s(receiver) } else { s(2) },
            });
        }
    }
    equality_frame(
        "eq_bcast",
        Kind::Broadcast,
        &[],
        Transitions::Broadcast { send, receive },
    )
}

/// Leaders `L0`/`L1` merge and keep the parity of their sum; followers copy
/// the parity of any leader they meet.
pub fn parity() -> ProtocolSpec {
    let (l0, l1, f0, f1) = (s(0), s(1), s(2), s(3));
    let leader = [l0, l1];
    let follower = [f0, f1];
    let mut rules = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let sum = (i + j) % 2;
            rules.push(PairRule {
                pre: (leader[i], leader[j]),
                post: (leader[sum], follower[sum]),
            });
            if i != j {
                rules.push(PairRule {
                    pre: (leader[i], follower[j]),
                    post: (leader[i], follower[i]),
                });
            }
        }
    }
    ProtocolSpec {
        name: "parity".into(),
        kind: Kind::Population,
        sigma: names(&["0"]),
        states: names(&["L0", "L1", "F0", "F1"]),
        messages: Vec::new(),
        input_map: vec![l1],
        output_map: vec![true, false, true, false],
        transitions: Transitions::Pairwise(rules),
        unreliable: false,
        fairness: Fairness::Default,
    }
}

/// Expected parity values `x0 mod 2 = 0` for `1 <= x0 <= max`.
pub fn parity_table(max: u32) -> ValueTable {
    let entries: BTreeMap<Vec<u32>, bool> = (1..=max).map(|n| (vec![n], n % 2 == 0)).collect();
    ValueTable { arity: 1, entries }
}

pub fn plusminus() -> ProtocolSpec {
    ProtocolSpec {
        name: "plusminus".into(),
        kind: Kind::Population,
        sigma: names(&["0"]),
        states: names(&["q0", "q+", "q-"]),
        messages: Vec::new(),
        input_map: vec![s(0)],
        output_map: vec![false, true, true],
        transitions: Transitions::Pairwise(vec![PairRule {
            pre: (s(0), s(0)),
            post: (s(1), s(2)),
        }]),
        unreliable: false,
        fairness: Fairness::Default,
    }
}

/// `init` sends `m` and moves to `sent`; receiving `m` leads to `yes`.
/// Shipped with message loss switched on.
pub fn qt_atleast2() -> ProtocolSpec {
    let (init, sent, yes) = (s(0), s(1), s(2));
    let m = MessageId(0);
    ProtocolSpec {
        name: "qt_atleast2".into(),
        kind: Kind::QueuedTransmission,
        sigma: names(&["0"]),
        states: names(&["init", "sent", "yes"]),
        messages: names(&["m"]),
        input_map: vec![init],
        output_map: vec![false, true, true],
        transitions: Transitions::Messages {
            send: vec![SendRule {
                from: init,
                to: sent,
                message: m,
            }],
            receive: vec![
                ReceiveRule {
                    from: sent,
                    message: m,
                    to: yes,
                },
                ReceiveRule {
                    from: yes,
                    message: m,
                    to: yes,
                },
            ],
        },
        unreliable: true,
        fairness: Fairness::Default,
    }
}

/// Delayed observation presence: `init` agents announce `hi`, `seen` agents
/// announce `ack`, and an `init` agent that hears anything moves to `seen`.
/// Shipped with message loss switched on.
pub fn do_presence() -> ProtocolSpec {
    let (init, seen) = (s(0), s(1));
    let (hi, ack) = (MessageId(0), MessageId(1));
    let receive = [init, seen]
        .into_iter()
        .flat_map(|from| {
            [hi, ack].map(|message| ReceiveRule {
                from,
                message,
                to: seen,
            })
        })
        .collect();
    ProtocolSpec {
        name: "do_presence".into(),
        kind: Kind::DelayedObservation,
        sigma: names(&["0"]),
        states: names(&["init", "seen"]),
        messages: names(&["hi", "ack"]),
        input_map: vec![init],
        output_map: vec![false, true],
        transitions: Transitions::Messages {
            send: vec![
                SendRule {
                    from: init,
                    to: init,
                    message: hi,
                },
                SendRule {
                    from: seen,
                    to: seen,
                    message: ack,
                },
            ],
            receive,
        },
        unreliable: true,
        fairness: Fairness::Default,
    }
}
