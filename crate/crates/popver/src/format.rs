//! The JSON protocol file format.
//!
//! ```json
//! {
//!   "name": "eq_pp",
//!   "kind": "population",
//!   "sigma": ["0", "1"],
//!   "states": ["q0", "q1", "q_bot"],
//!   "input_map": {"0": "q0", "1": "q1"},
//!   "output_map": {"q0": true, "q1": true, "q_bot": false},
//!   "delta": [[["q0", "q1"], ["q_bot", "q_bot"]]],
//!   "unreliable": false
//! }
//! ```
//!
//! Message kinds use `delta_s: [[q, [q', m]]]` and `delta_r: [[[q, m], q']]`,
//! broadcast uses `delta_s: [[q, q']]` and `delta_r: [[[q_j, q], q_j']]`, and
//! the custom kind lists step schemas under `schemas`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use popver_core::protocol::{
    BroadcastReceive, Fairness, Kind, MessageId, PairRule, ProtocolSpec, ReceiveRule, SendRule, StateId, Transitions,
};
use popver_core::StepSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA: &str = include_str!("../schema/protocol.schema.json");

type Pair = (String, String);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaEntry {
    pub active: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub passive: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub consumed: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub produced: Vec<String>,
}

/// The document as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolFile {
    pub name: String,
    pub kind: String,
    pub sigma: Vec<String>,
    pub states: Vec<String>,
    #[serde(default)]
    pub messages: Vec<String>,
    pub input_map: BTreeMap<String, String>,
    pub output_map: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<(Pair, Pair)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_r: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemas: Option<Vec<SchemaEntry>>,
    #[serde(default)]
    pub unreliable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness: Option<String>,
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Schema violations of a protocol document, one message each.
pub fn schema_errors(doc: &Value) -> Vec<String> {
    validator()
        .iter_errors(doc)
        .map(|e| {
            let path = e.instance_path().to_string();
            if path.is_empty() {
                e.to_string()
            } else {
                format!("{path}: {e}")
            }
        })
        .collect()
}

struct Names<'a> {
    spec: &'a ProtocolSpec,
}

impl Names<'_> {
    fn state(&self, name: &str) -> Result<StateId, CliError> {
        self.spec
            .state_id(name)
            .ok_or_else(|| CliError::Format(format!("unknown state `{name}`")))
    }

    fn message(&self, name: &str) -> Result<MessageId, CliError> {
        self.spec
            .message_id(name)
            .ok_or_else(|| CliError::Format(format!("unknown message `{name}`")))
    }

    fn pair(&self, (a, b): &Pair) -> Result<(StateId, StateId), CliError> {
        Ok((self.state(a)?, self.state(b)?))
    }
}

fn table<T: serde::de::DeserializeOwned>(v: &Option<Value>, field: &str) -> Result<T, CliError> {
    let v = v
        .clone()
        .ok_or_else(|| CliError::Format(format!("missing `{field}`")))?;
    serde_json::from_value(v).map_err(|e| CliError::Format(format!("`{field}`: {e}")))
}

impl ProtocolFile {
    pub fn to_spec(&self) -> Result<ProtocolSpec, CliError> {
        let kind: Kind = self.kind.parse()?;
        let mut spec = ProtocolSpec {
            name: self.name.clone(),
            kind,
            sigma: self.sigma.clone(),
            states: self.states.clone(),
            messages: self.messages.clone(),
            input_map: Vec::new(),
            output_map: Vec::new(),
            transitions: Transitions::Pairwise(Vec::new()),
            unreliable: self.unreliable,
            fairness: Fairness::Default,
        };
        let n = Names { spec: &spec };
        let mut input_map = Vec::new();
        for sym in &self.sigma {
            let q = self
                .input_map
                .get(sym)
                .ok_or_else(|| CliError::Format(format!("input_map has no entry for symbol `{sym}`")))?;
            input_map.push(n.state(q)?);
        }
        if let Some(extra) = self.input_map.keys().find(|k| !self.sigma.contains(k)) {
            return Err(CliError::Format(format!("input_map names unknown symbol `{extra}`")));
        }
        let mut output_map = Vec::new();
        for q in &self.states {
            let b = self
                .output_map
                .get(q)
                .ok_or_else(|| CliError::Format(format!("output_map has no entry for state `{q}`")))?;
            output_map.push(*b);
        }
        for q in self.output_map.keys() {
            n.state(q)?;
        }

        let transitions = match kind {
            k if k.is_pairwise() => {
                let rules = self
                    .delta
                    .as_ref()
                    .ok_or_else(|| CliError::Format("missing `delta`".into()))?;
                Transitions::Pairwise(
                    rules
                        .iter()
                        .map(|(pre, post)| {
                            Ok(PairRule {
                                pre: n.pair(pre)?,
                                post: n.pair(post)?,
                            })
                        })
                        .collect::<Result<_, CliError>>()?,
                )
            }
            k if k.is_message_based() => {
                let send: Vec<(String, Pair)> = table(&self.delta_s, "delta_s")?;
                let receive: Vec<(Pair, String)> = table(&self.delta_r, "delta_r")?;
                Transitions::Messages {
                    send: send
                        .iter()
                        .map(|(q, (q2, m))| {
                            Ok(SendRule {
                                from: n.state(q)?,
                                to: n.state(q2)?,
                                message: n.message(m)?,
                            })
                        })
                        .collect::<Result<_, CliError>>()?,
                    receive: receive
                        .iter()
                        .map(|((q, m), q2)| {
                            Ok(ReceiveRule {
                                from: n.state(q)?,
                                message: n.message(m)?,
                                to: n.state(q2)?,
                            })
                        })
                        .collect::<Result<_, CliError>>()?,
                }
            }
            Kind::Broadcast => {
                let send: Vec<Pair> = table(&self.delta_s, "delta_s")?;
                let receive: Vec<(Pair, String)> = table(&self.delta_r, "delta_r")?;
                Transitions::Broadcast {
                    send: send.iter().map(|p| n.pair(p)).collect::<Result<_, _>>()?,
                    receive: receive
                        .iter()
                        .map(|((r, s), to)| {
                            Ok(BroadcastReceive {
                                receiver: n.state(r)?,
                                sender: n.state(s)?,
                                to: n.state(to)?,
                            })
                        })
                        .collect::<Result<_, CliError>>()?,
                }
            }
            _ => {
                let schemas = self
                    .schemas
                    .as_ref()
                    .ok_or_else(|| CliError::Format("missing `schemas`".into()))?;
                Transitions::Custom(
                    schemas
                        .iter()
                        .map(|s| {
                            Ok(StepSchema {
                                active: s.active.iter().map(|p| n.pair(p)).collect::<Result<_, _>>()?,
                                passive: s.passive.iter().map(|p| n.pair(p)).collect::<Result<_, _>>()?,
                                consumed: s.consumed.iter().map(|m| n.message(m)).collect::<Result<_, _>>()?,
                                produced: s.produced.iter().map(|m| n.message(m)).collect::<Result<_, _>>()?,
                            })
                        })
                        .collect::<Result<_, CliError>>()?,
                )
            }
        };
        spec.input_map = input_map;
        spec.output_map = output_map;
        spec.transitions = transitions;
        Ok(spec)
    }

    pub fn from_spec(spec: &ProtocolSpec) -> ProtocolFile {
        let q = |s: StateId| spec.state_name(s).to_string();
        let m = |x: MessageId| spec.message_name(x).to_string();
        let pair = |(a, b): (StateId, StateId)| (q(a), q(b));
        let mut file = ProtocolFile {
            name: spec.name.clone(),
            kind: spec.kind.to_string(),
            sigma: spec.sigma.clone(),
            states: spec.states.clone(),
            messages: spec.messages.clone(),
            input_map: spec
                .sigma
                .iter()
                .cloned()
                .zip(spec.input_map.iter().map(|s| q(*s)))
                .collect(),
            output_map: spec
                .states
                .iter()
                .cloned()
                .zip(spec.output_map.iter().copied())
                .collect(),
            delta: None,
            delta_s: None,
            delta_r: None,
            schemas: None,
            unreliable: spec.unreliable,
            fairness: None,
        };
        match &spec.transitions {
            Transitions::Pairwise(rules) => {
                file.delta = Some(rules.iter().map(|r| (pair(r.pre), pair(r.post))).collect());
            }
            Transitions::Messages { send, receive } => {
                let s: Vec<(String, Pair)> = send.iter().map(|r| (q(r.from), (q(r.to), m(r.message)))).collect();
                let r: Vec<(Pair, String)> = receive.iter().map(|r| ((q(r.from), m(r.message)), q(r.to))).collect();
                file.delta_s = Some(serde_json::to_value(s).expect("tables serialize"));
                file.delta_r = Some(serde_json::to_value(r).expect("tables serialize"));
            }
            Transitions::Broadcast { send, receive } => {
                let s: Vec<Pair> = send.iter().map(|p| pair(*p)).collect();
                let r: Vec<(Pair, String)> = receive
                    .iter()
                    .map(|r| ((q(r.receiver), q(r.sender)), q(r.to)))
                    .collect();
                file.delta_s = Some(serde_json::to_value(s).expect("tables serialize"));
                file.delta_r = Some(serde_json::to_value(r).expect("tables serialize"));
            }
            Transitions::Custom(schemas) => {
                file.schemas = Some(
                    schemas
                        .iter()
                        .map(|s| SchemaEntry {
                            active: s.active.iter().map(|p| pair(*p)).collect(),
                            passive: s.passive.iter().map(|p| pair(*p)).collect(),
                            consumed: s.consumed.iter().map(|x| m(*x)).collect(),
                            produced: s.produced.iter().map(|x| m(*x)).collect(),
                        })
                        .collect(),
                );
            }
        }
        file
    }
}

/// Parses and schema-checks a protocol document.
pub fn parse_protocol(text: &str) -> Result<ProtocolSpec, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Format(format!("not JSON: {e}")))?;
    let errors = schema_errors(&doc);
    if !errors.is_empty() {
        return Err(CliError::Schema(errors));
    }
    let file: ProtocolFile = serde_json::from_value(doc).map_err(|e| CliError::Format(e.to_string()))?;
    file.to_spec()
}

pub fn protocol_to_json(spec: &ProtocolSpec) -> String {
    let mut text = serde_json::to_string_pretty(&ProtocolFile::from_spec(spec)).expect("protocol serializes");
    text.push('\n');
    text
}
