//! Value tables: one `x0 x1 ... -> true|false` entry per line. Blank lines
//! and lines starting with `#` are skipped.

use std::collections::BTreeMap;

use popver_core::verify::ValueTable;

use crate::error::CliError;

pub fn parse_table(text: &str) -> Result<ValueTable, CliError> {
    let mut arity = None;
    let mut entries = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |why: &str| CliError::Format(format!("table line {}: {why}", i + 1));
        let (lhs, rhs) = line.split_once("->").ok_or_else(|| bad("expected `->`"))?;
        let x = lhs
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<Result<Vec<u32>, _>>()
            .map_err(|_| bad("counts must be natural numbers"))?;
        let value = match rhs.trim() {
            "true" => true,
            "false" => false,
            _ => return Err(bad("value must be `true` or `false`")),
        };
        match arity {
            None => arity = Some(x.len()),
            Some(a) if a != x.len() => return Err(bad(&format!("expected {a} counts, found {}", x.len()))),
            _ => {}
        }
        if entries.insert(x, value).is_some_and(|old| old != value) {
            return Err(bad("conflicting entry"));
        }
    }
    Ok(ValueTable {
        arity: arity.ok_or_else(|| CliError::Format("table has no entries".into()))?,
        entries,
    })
}

pub fn format_table(table: &ValueTable) -> String {
    let mut out = String::new();
    for (x, v) in &table.entries {
        let counts: Vec<String> = x.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!("{} -> {v}\n", counts.join(" ")));
    }
    out
}
