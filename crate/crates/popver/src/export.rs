//! DOT graphs and multi-trace text.

use std::collections::BTreeSet;
use std::fmt::Write;

use popver_core::constructions::ShadowRun;
use popver_core::graph::ReachGraph;
use popver_core::protocol::ProtocolSpec;
use popver_core::step::Output;
use popver_core::trace::config_line;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", escape(s))
}

fn output_name(o: Output) -> &'static str {
    match o {
        Output::Consensus(true) => "true",
        Output::Consensus(false) => "false",
        Output::Mixed => "mixed",
    }
}

/// The reachability graph with every terminal SCC in its own cluster.
/// Clusters that are terminal only because of the packet cap are dashed.
pub fn graph_to_dot(spec: &ProtocolSpec, g: &ReachGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(&spec.name));
    out.push_str("  node [shape=box, fontname=monospace];\n");
    let mut clustered = BTreeSet::new();
    for scc in (0..g.scc_count()).filter(|s| g.is_terminal_scc(*s)) {
        let members = g.scc_members(scc);
        let first = g.output(members[0]);
        let consensus = members.iter().all(|u| g.output(*u) == first);
        let mut label = format!("terminal SCC {scc}: ");
        label.push_str(if consensus { output_name(first) } else { "mixed" });
        let _ = writeln!(out, "  subgraph cluster_{scc} {{");
        let _ = writeln!(out, "    label={};", quote(&label));
        if g.is_cap_artifact(scc) {
            out.push_str("    style=dashed;\n");
        }
        for u in members {
            let _ = writeln!(out, "    n{u};");
            clustered.insert(*u);
        }
        out.push_str("  }\n");
    }
    for (u, c) in g.nodes().iter().enumerate() {
        let root = if u == 0 { ", peripheries=2" } else { "" };
        let _ = writeln!(
            out,
            "  n{u} [label=\"{}\\n{}\"{root}];",
            escape(&config_line(spec, c)),
            output_name(g.output(u))
        );
    }
    let pairs: BTreeSet<(usize, usize)> = g.edges().iter().map(|e| (e.from, e.to)).collect();
    for (a, b) in pairs {
        let _ = writeln!(out, "  n{a} -> n{b};");
    }
    out.push_str("}\n");
    out
}

/// The base lasso, then every shadow of every agent, each under a `##`
/// header line.
pub fn shadow_run_to_text(spec: &ProtocolSpec, run: &ShadowRun) -> String {
    let mut out = String::from("## base\n");
    out.push_str(&run.base.to_text(spec));
    for (agent, ext) in &run.extensions {
        for (i, t) in ext.shadows.iter().enumerate() {
            let _ = writeln!(out, "## agent {} shadow {i} as agent {}", agent.0, ext.shadow_agent.0);
            out.push_str(&t.to_text(spec));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use popver_core::config::{IdConfig, MultiConfig};
    use popver_core::constructions::shadow::{build_shadow_extension, DEFAULT_MAX_STEPS};
    use popver_core::corpus;
    use popver_core::graph::{build_reach_graph, GraphLimits};
    use popver_core::protocol::PacketCap;

    #[test]
    fn equality_dot() {
        let spec = corpus::eq_pp();
        let c = MultiConfig::from_counts(vec![1, 1, 0], vec![]);
        let g = build_reach_graph(&spec, &c, GraphLimits::new(PacketCap::Finite(0))).unwrap();
        let dot = graph_to_dot(&spec, &g);
        assert!(dot.starts_with("digraph \"eq_pp\" {"));
        assert!(dot.contains("label=\"terminal SCC 0: false\""), "{dot}");
        assert!(dot.contains("n0 [label=\"q0:1 q1:1\\ntrue\", peripheries=2];"), "{dot}");
        assert!(dot.contains("n0 -> n1;"));
        assert_eq!(dot.matches("subgraph").count(), 1);
    }

    #[test]
    fn capped_clusters_are_dashed() {
        let spec = corpus::qt_atleast2();
        let c = MultiConfig::from_counts(vec![2, 0, 0], vec![0]);
        let g = build_reach_graph(&spec, &c, GraphLimits::new(PacketCap::Finite(1))).unwrap();
        assert!(graph_to_dot(&spec, &g).contains("style=dashed"));
    }

    #[test]
    fn shadow_text_sections() {
        let spec = corpus::eq_pp().with_unreliable(true);
        let init = IdConfig::from_multi(&MultiConfig::from_counts(vec![1, 1, 0], vec![]));
        let run =
            build_shadow_extension(&spec, &init, GraphLimits::new(PacketCap::Finite(0)), DEFAULT_MAX_STEPS).unwrap();
        let text = shadow_run_to_text(&spec, &run);
        assert!(text.starts_with("## base\nq0:1 q1:1\n"));
        assert!(text.contains("## agent 0 shadow 0 as agent 2\n"));
        assert!(text.contains("## agent 1 shadow 0 as agent 2\n"));
    }
}
