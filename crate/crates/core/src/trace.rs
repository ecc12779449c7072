//! Finite executions and lassos over identified configurations.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::config::{AgentId, IdConfig, MultiConfig};
use crate::error::{Error, Result};
use crate::protocol::{PacketCap, ProtocolSpec};
use crate::unreliable::is_engine_step;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceStep {
    Step { active: BTreeSet<AgentId> },
    Stutter,
}

/// `configs[i] -> configs[i + 1]` is `steps[i]`. With `lasso_start = Some(j)`
/// the last configuration equals `configs[j]` and steps `j..` repeat forever.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub configs: Vec<IdConfig>,
    pub steps: Vec<TraceStep>,
    pub lasso_start: Option<usize>,
    /// Free-form annotations attached to configuration indices.
    pub marks: Vec<(usize, String)>,
}

impl ExecutionTrace {
    pub fn new(init: IdConfig) -> Self {
        ExecutionTrace {
            configs: alloc::vec![init],
            ..Default::default()
        }
    }

    pub fn last(&self) -> &IdConfig {
        self.configs.last().expect("trace has an initial configuration")
    }

    pub fn push(&mut self, step: TraceStep, next: IdConfig) {
        self.steps.push(step);
        self.configs.push(next);
    }

    pub fn push_stutter(&mut self) {
        let last = self.last().clone();
        self.push(TraceStep::Stutter, last);
    }

    pub fn mark(&mut self, label: impl Into<String>) {
        self.marks.push((self.configs.len() - 1, label.into()));
    }

    /// Appends `tail`, which must start where `self` ends. Its lasso and
    /// marks are shifted along.
    pub fn append(&mut self, tail: &ExecutionTrace) {
        debug_assert_eq!(self.last(), &tail.configs[0]);
        let offset = self.configs.len() - 1;
        for (step, c) in tail.steps.iter().zip(&tail.configs[1..]) {
            self.push(step.clone(), c.clone());
        }
        if let Some(j) = tail.lasso_start {
            self.lasso_start = Some(offset + j);
        }
        self.marks
            .extend(tail.marks.iter().map(|(i, l)| (offset + i, l.clone())));
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Indices of the repeating part, if this is a lasso.
    pub fn cycle(&self) -> Option<core::ops::Range<usize>> {
        self.lasso_start.map(|j| j..self.configs.len() - 1)
    }

    pub fn projections(&self, spec: &ProtocolSpec) -> Vec<MultiConfig> {
        self.configs.iter().map(|c| c.project(spec)).collect()
    }

    /// Line-oriented export: one configuration per line as sorted
    /// `state:count` pairs, then ` | ` and `msg:count` pairs if packets exist.
    /// Step, lasso and annotation lines start with `#`.
    pub fn to_text(&self, spec: &ProtocolSpec) -> String {
        let mut out = String::new();
        for (i, c) in self.configs.iter().enumerate() {
            if self.lasso_start == Some(i) {
                out.push_str("# lasso\n");
            }
            for (_, label) in self.marks.iter().filter(|(k, _)| *k == i) {
                let _ = writeln!(out, "# mark {label}");
            }
            out.push_str(&config_line(spec, &c.project(spec)));
            out.push('\n');
            match self.steps.get(i) {
                Some(TraceStep::Step { active }) => {
                    let ids: Vec<String> = active.iter().map(|a| format!("{}", a.0)).collect();
                    let _ = writeln!(out, "# step active={}", ids.join(","));
                }
                Some(TraceStep::Stutter) => out.push_str("# stutter\n"),
                None => {}
            }
        }
        out
    }
}

/// `state:count` pairs sorted by name, then ` | ` and `msg:count` pairs.
pub fn config_line(spec: &ProtocolSpec, c: &MultiConfig) -> String {
    let mut states: Vec<(&str, u32)> = spec
        .state_ids()
        .filter(|q| c.count(*q) > 0)
        .map(|q| (spec.state_name(q), c.count(q)))
        .collect();
    states.sort();
    let mut msgs: Vec<(&str, u32)> = spec
        .message_ids()
        .filter(|m| c.supply(*m) > 0)
        .map(|m| (spec.message_name(m), c.supply(m)))
        .collect();
    msgs.sort();
    let mut line: Vec<String> = states.iter().map(|(n, k)| format!("{n}:{k}")).collect();
    let mut text = line.join(" ");
    if !msgs.is_empty() {
        line = msgs.iter().map(|(n, k)| format!("{n}:{k}")).collect();
        text.push_str(" | ");
        text.push_str(&line.join(" "));
    }
    text
}

/// Checks that every step is a step of the protocol under its semantics and
/// that a lasso closes. The first bad index is reported.
pub fn validate_trace(spec: &ProtocolSpec, trace: &ExecutionTrace, cap: PacketCap) -> Result<()> {
    let invalid = |index: usize, reason: String| Err(Error::InvalidTrace { index, reason });
    if trace.configs.is_empty() {
        return invalid(0, "no configurations".into());
    }
    if trace.steps.len() + 1 != trace.configs.len() {
        return invalid(
            trace.steps.len().min(trace.configs.len()),
            format!("{} steps for {} configurations", trace.steps.len(), trace.configs.len()),
        );
    }
    for (i, step) in trace.steps.iter().enumerate() {
        let (pre, post) = (&trace.configs[i], &trace.configs[i + 1]);
        match step {
            TraceStep::Stutter if pre != post => return invalid(i, "stutter changes the configuration".into()),
            TraceStep::Stutter => {}
            TraceStep::Step { active } => {
                if !is_engine_step(spec, pre, active, post, cap) {
                    return invalid(i, "not a step of the protocol".into());
                }
            }
        }
    }
    if let Some(j) = trace.lasso_start {
        let n = trace.configs.len() - 1;
        if j >= n {
            return invalid(j, "lasso cycle is empty".into());
        }
        if trace.configs[j] != trace.configs[n] {
            return invalid(n, "lasso does not close".into());
        }
    }
    Ok(())
}
