//! Protocol descriptions for every supported class.
//!
//! Transition relations are stored as explicit tuple lists, never as partial
//! functions. A pair of states that has no pairwise rule does not interact;
//! a broadcast receiver whose state has no receive rule keeps its state.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::config::StepSchema;
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl MessageId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Population,
    ImmediateTransmission,
    ImmediateObservation,
    QueuedTransmission,
    DelayedTransmission,
    DelayedObservation,
    Broadcast,
    Custom,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Population,
        Kind::ImmediateTransmission,
        Kind::ImmediateObservation,
        Kind::QueuedTransmission,
        Kind::DelayedTransmission,
        Kind::DelayedObservation,
        Kind::Broadcast,
        Kind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Population => "population",
            Kind::ImmediateTransmission => "immediate_transmission",
            Kind::ImmediateObservation => "immediate_observation",
            Kind::QueuedTransmission => "queued_transmission",
            Kind::DelayedTransmission => "delayed_transmission",
            Kind::DelayedObservation => "delayed_observation",
            Kind::Broadcast => "broadcast",
            Kind::Custom => "custom",
        }
    }

    pub fn is_pairwise(self) -> bool {
        matches!(
            self,
            Kind::Population | Kind::ImmediateTransmission | Kind::ImmediateObservation
        )
    }

    pub fn is_message_based(self) -> bool {
        matches!(
            self,
            Kind::QueuedTransmission | Kind::DelayedTransmission | Kind::DelayedObservation
        )
    }

    /// Whether the second agent of a pairwise rule is passive. Only population
    /// protocols treat both partners as active; in the transmission and
    /// observation classes the first agent alone transmits.
    pub fn second_agent_passive(self) -> bool {
        matches!(self, Kind::ImmediateTransmission | Kind::ImmediateObservation)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// `((q1, q2), (q3, q4))`: agents in `q1` and `q2` move to `q3` and `q4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairRule {
    pub pre: (StateId, StateId),
    pub post: (StateId, StateId),
}

/// `(q, (q', m))`: an agent in `q` sends `m` and moves to `q'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SendRule {
    pub from: StateId,
    pub to: StateId,
    pub message: MessageId,
}

/// `((q, m), q')`: an agent in `q` consumes `m` and moves to `q'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReceiveRule {
    pub from: StateId,
    pub message: MessageId,
    pub to: StateId,
}

/// `((q_j, q), q'_j)`: a receiver in `q_j` hearing a broadcast from `q` may move to `q'_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BroadcastReceive {
    pub receiver: StateId,
    pub sender: StateId,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transitions {
    Pairwise(Vec<PairRule>),
    Messages {
        send: Vec<SendRule>,
        receive: Vec<ReceiveRule>,
    },
    Broadcast {
        send: Vec<(StateId, StateId)>,
        receive: Vec<BroadcastReceive>,
    },
    /// Step schemas applied in any context with enough agents and packets.
    Custom(Vec<StepSchema>),
}

impl Transitions {
    fn shape(&self) -> &'static str {
        match self {
            Transitions::Pairwise(_) => "pairwise delta",
            Transitions::Messages { .. } => "send/receive tables",
            Transitions::Broadcast { .. } => "broadcast tables",
            Transitions::Custom(_) => "step schema table",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Fairness {
    #[default]
    Default,
}

/// Upper bound on the number of packets a step may leave behind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketCap {
    Finite(u32),
    Unbounded,
}

impl core::fmt::Display for PacketCap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PacketCap::Finite(k) => write!(f, "{k}"),
            PacketCap::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl PacketCap {
    /// A step from `before` to `after` packets is allowed unless it grows the
    /// packet count beyond the cap.
    pub fn allows(self, before: u32, after: u32) -> bool {
        match self {
            PacketCap::Unbounded => true,
            PacketCap::Finite(cap) => after <= cap || after <= before,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, PacketCap::Finite(_))
    }
}

impl From<u32> for PacketCap {
    fn from(cap: u32) -> Self {
        PacketCap::Finite(cap)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolSpec {
    pub name: String,
    pub kind: Kind,
    pub sigma: Vec<String>,
    pub states: Vec<String>,
    pub messages: Vec<String>,
    /// Indexed by input symbol position.
    pub input_map: Vec<StateId>,
    /// Indexed by state.
    pub output_map: Vec<bool>,
    pub transitions: Transitions,
    pub unreliable: bool,
    pub fairness: Fairness,
}

impl ProtocolSpec {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_messages(&self) -> usize {
        self.messages.len()
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(|i| StateId(i as u32))
    }

    pub fn message_id(&self, name: &str) -> Option<MessageId> {
        self.messages
            .iter()
            .position(|s| s == name)
            .map(|i| MessageId(i as u32))
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.sigma.iter().position(|s| s == name)
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.index()]
    }

    pub fn message_name(&self, m: MessageId) -> &str {
        &self.messages[m.index()]
    }

    pub fn output(&self, q: StateId) -> bool {
        self.output_map[q.index()]
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn message_ids(&self) -> impl Iterator<Item = MessageId> {
        (0..self.messages.len() as u32).map(MessageId)
    }

    /// Whether some step can create a packet.
    pub fn produces_packets(&self) -> bool {
        match &self.transitions {
            Transitions::Messages { send, .. } => !send.is_empty(),
            Transitions::Custom(schemas) => schemas.iter().any(|s| !s.produced.is_empty()),
            _ => false,
        }
    }

    /// The same protocol with the message-loss semantics switched on or off.
    pub fn with_unreliable(&self, unreliable: bool) -> ProtocolSpec {
        ProtocolSpec {
            unreliable,
            ..self.clone()
        }
    }
}

/// One violated condition found by [`validate_protocol`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub condition: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

/// Checks structural invariants and the class conditions of the declared
/// kind. An empty report means the protocol is valid.
pub fn validate_protocol(spec: &ProtocolSpec) -> Vec<Violation> {
    let mut report = Vec::new();
    macro_rules! push {
        ($condition:expr, $detail:expr $(,)?) => {
            report.push(Violation {
                condition: $condition,
                detail: $detail,
            })
        };
    }

    if spec.states.is_empty() {
        push!("states", "state set is empty".into());
    }
    if spec.sigma.is_empty() {
        push!("sigma", "input alphabet is empty".into());
    }
    for (what, names) in [
        ("states", &spec.states),
        ("messages", &spec.messages),
        ("sigma", &spec.sigma),
    ] {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n.as_str()) {
                push!(what, format!("duplicate name `{n}`"));
            }
        }
    }
    if spec.input_map.len() != spec.sigma.len() {
        push!(
            "input_map",
            format!("defined for {} of {} symbols", spec.input_map.len(), spec.sigma.len()),
        );
    }
    if spec.output_map.len() != spec.states.len() {
        push!(
            "output_map",
            format!("defined for {} of {} states", spec.output_map.len(), spec.states.len()),
        );
    }

    let nq = spec.states.len() as u32;
    let nm = spec.messages.len() as u32;
    let bad_state = |q: StateId, ctx: &str| {
        if q.0 >= nq {
            Some(format!("{ctx} refers to undeclared state #{}", q.0))
        } else {
            None
        }
    };
    let mut undeclared = Vec::new();
    for (i, q) in spec.input_map.iter().enumerate() {
        undeclared.extend(bad_state(*q, &format!("input_map[{i}]")));
    }
    let msg_ok = |m: MessageId| m.0 < nm;
    match &spec.transitions {
        Transitions::Pairwise(rules) => {
            for r in rules {
                for q in [r.pre.0, r.pre.1, r.post.0, r.post.1] {
                    undeclared.extend(bad_state(q, "delta"));
                }
            }
        }
        Transitions::Messages { send, receive } => {
            for r in send {
                undeclared.extend(bad_state(r.from, "delta_s"));
                undeclared.extend(bad_state(r.to, "delta_s"));
                if !msg_ok(r.message) {
                    undeclared.push(format!("delta_s refers to undeclared message #{}", r.message.0));
                }
            }
            for r in receive {
                undeclared.extend(bad_state(r.from, "delta_r"));
                undeclared.extend(bad_state(r.to, "delta_r"));
                if !msg_ok(r.message) {
                    undeclared.push(format!("delta_r refers to undeclared message #{}", r.message.0));
                }
            }
        }
        Transitions::Broadcast { send, receive } => {
            for (a, b) in send {
                undeclared.extend(bad_state(*a, "delta_s"));
                undeclared.extend(bad_state(*b, "delta_s"));
            }
            for r in receive {
                for q in [r.receiver, r.sender, r.to] {
                    undeclared.extend(bad_state(q, "delta_r"));
                }
            }
        }
        Transitions::Custom(schemas) => {
            for s in schemas {
                for (a, b) in s.active.iter().chain(&s.passive) {
                    undeclared.extend(bad_state(*a, "schema"));
                    undeclared.extend(bad_state(*b, "schema"));
                }
                for m in s.consumed.iter().chain(&s.produced) {
                    if !msg_ok(*m) {
                        undeclared.push(format!("schema refers to undeclared message #{}", m.0));
                    }
                }
            }
        }
    }
    for d in undeclared {
        push!("declared", d);
    }
    if !report.is_empty() {
        return report;
    }

    let expected_shape = match spec.kind {
        k if k.is_pairwise() => matches!(spec.transitions, Transitions::Pairwise(_)),
        k if k.is_message_based() => matches!(spec.transitions, Transitions::Messages { .. }),
        Kind::Broadcast => matches!(spec.transitions, Transitions::Broadcast { .. }),
        _ => matches!(spec.transitions, Transitions::Custom(_)),
    };
    if !expected_shape {
        push!(
            "kind",
            format!(
                "{} protocol cannot be described by {}",
                spec.kind,
                spec.transitions.shape()
            ),
        );
        return report;
    }
    if spec.kind.is_pairwise() && !spec.messages.is_empty() {
        push!("messages", format!("{} protocols have no messages", spec.kind));
    }
    if spec.kind.is_message_based() && spec.messages.is_empty() {
        push!(
            "messages",
            format!("{} protocols need a nonempty message set", spec.kind)
        );
    }
    if spec.kind == Kind::Broadcast && !spec.messages.is_empty() {
        push!("messages", "broadcast protocols have no messages".into());
    }

    match (&spec.transitions, spec.kind) {
        (Transitions::Pairwise(rules), Kind::ImmediateTransmission) => {
            check_immediate_transmission(spec, rules, &mut report);
        }
        (Transitions::Pairwise(rules), Kind::ImmediateObservation) => {
            check_immediate_transmission(spec, rules, &mut report);
            for r in rules {
                if r.pre.0 != r.post.0 {
                    report.push(Violation {
                        condition: "immediate_observation",
                        detail: format!("rule {} changes the first agent", fmt_pair_rule(spec, r)),
                    });
                }
            }
        }
        (Transitions::Messages { send, receive }, kind) => {
            if matches!(kind, Kind::DelayedTransmission | Kind::DelayedObservation) {
                for q in spec.state_ids() {
                    for m in spec.message_ids() {
                        if !receive.iter().any(|r| r.from == q && r.message == m) {
                            report.push(Violation {
                                condition: "delayed_transmission",
                                detail: format!(
                                    "state {} cannot receive message {}",
                                    spec.state_name(q),
                                    spec.message_name(m)
                                ),
                            });
                        }
                    }
                }
            }
            if kind == Kind::DelayedObservation {
                for r in send {
                    if r.from != r.to {
                        report.push(Violation {
                            condition: "delayed_observation",
                            detail: format!(
                                "sending {} moves {} to {}",
                                spec.message_name(r.message),
                                spec.state_name(r.from),
                                spec.state_name(r.to)
                            ),
                        });
                    }
                }
            }
        }
        _ => {}
    }
    report
}

/// The transmission conditions, reading a pair with no rule as the identity
/// interaction.
fn check_immediate_transmission(spec: &ProtocolSpec, rules: &[PairRule], report: &mut Vec<Violation>) {
    for q1 in spec.state_ids() {
        let with_first: Vec<&PairRule> = rules.iter().filter(|r| r.pre.0 == q1).collect();
        if with_first.is_empty() {
            continue;
        }
        for (i, a) in with_first.iter().enumerate() {
            for b in &with_first[i + 1..] {
                if a.post.0 != b.post.0 {
                    report.push(Violation {
                        condition: "immediate_transmission",
                        detail: format!(
                            "first-agent result differs between {} and {}",
                            fmt_pair_rule(spec, a),
                            fmt_pair_rule(spec, b)
                        ),
                    });
                }
            }
        }
        let q3 = with_first[0].post.0;
        for q2 in spec.state_ids() {
            let covered = with_first.iter().any(|r| r.pre.1 == q2 && r.post.0 == q3);
            let identity = q3 == q1 && !with_first.iter().any(|r| r.pre.1 == q2);
            if !covered && !identity {
                report.push(Violation {
                    condition: "immediate_transmission",
                    detail: format!(
                        "no rule lets {} move to {} next to {}",
                        spec.state_name(q1),
                        spec.state_name(q3),
                        spec.state_name(q2)
                    ),
                });
            }
        }
    }
}

fn fmt_pair_rule(spec: &ProtocolSpec, r: &PairRule) -> String {
    format!(
        "(({},{}),({},{}))",
        spec.state_name(r.pre.0),
        spec.state_name(r.pre.1),
        spec.state_name(r.post.0),
        spec.state_name(r.post.1)
    )
}
