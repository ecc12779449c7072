//! `popver` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use popver_core::config::IdConfig;
use popver_core::constructions::asynchronous::{FullF, ThresholdF, ToyF};
use popver_core::constructions::careful::{
    build_careful_execution, check_careful, two_agent_equivalence_check, CarefulOptions, TwoAgentVerdict,
};
use popver_core::constructions::shadow::{
    build_shadow_extension, check_shadow_extension, shadow_extension_exists, DEFAULT_MAX_STEPS,
};
use popver_core::constructions::truncation::{check_truncatable_at, find_truncation_constant};
use popver_core::corpus::{self, Expected, NAMES};
use popver_core::graph::{build_reach_graph, GraphLimits};
use popver_core::predicate::{parse_predicate, synthesize_io_protocol_over};
use popver_core::protocol::{validate_protocol, PacketCap, ProtocolSpec};
use popver_core::simulate::{adversarial_execution, random_execution};
use popver_core::step::{input_config, output_of, Output};
use popver_core::trace::{config_line, ExecutionTrace};
use popver_core::verify::{inputs, is_well_specified, verify_implements, Expectation, VerifyOptions, VerifyReport};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::export::{graph_to_dot, shadow_run_to_text};
use crate::format::{parse_protocol, protocol_to_json, schema_errors};
use crate::table::{format_table, parse_table};

#[derive(Parser, Debug)]
#[command(
    name = "popver",
    version,
    about = "Model checking and constructions for population protocols under message loss"
)]
pub struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// One JSON object per line instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Largest population explored.
    #[arg(long, global = true, value_name = "N")]
    max_agents: Option<u32>,
    /// Packets a step may leave behind, or `unbounded`.
    #[arg(long, global = true, value_name = "K", value_parser = parse_cap)]
    packet_cap: Option<PacketCap>,
    /// Seed of the random scheduler.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Configurations one graph may hold.
    #[arg(long, global = true, value_name = "NODES")]
    budget_nodes: Option<usize>,
    /// Switch message loss on.
    #[arg(long, global = true)]
    unreliable: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Built-in protocols.
    List,
    /// Schema and class conditions of a protocol.
    Validate { protocol: String },
    /// A random or adversarial execution.
    Simulate {
        protocol: String,
        /// Agents per input symbol, comma separated.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_counts)]
        input: Vec<u32>,
        /// Scheduler moves.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Stutter as long as possible and take the last changing step.
        #[arg(long)]
        adversarial: bool,
    },
    /// Checks every input up to `--max-agents` against a predicate or table.
    /// Without either, built-ins use their own expectation and other
    /// protocols are checked for well-specification.
    Verify {
        protocol: String,
        /// Counting predicate in the expression language.
        #[arg(long, conflicts_with = "table")]
        pred: Option<String>,
        /// Value table, one `x0 x1 ... -> true|false` line per input.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Compiles a counting predicate into an immediate observation protocol.
    Synth {
        expr: String,
        /// Names of the input symbols.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        sigma: Vec<String>,
        /// Output file instead of standard output.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Reachability graph of one input as DOT.
    Graph {
        protocol: String,
        /// Agents per input symbol, comma separated.
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_counts)]
        input: Vec<u32>,
        /// Output file instead of standard output.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Shadow extensions for every input with `--agents` agents.
    Shadow {
        protocol: String,
        /// Population size.
        #[arg(long, default_value_t = 2)]
        agents: u32,
        /// Exhaustive search over executions instead of the construction.
        #[arg(long)]
        oracle: bool,
        /// Longest base execution tried by the oracle.
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        /// Output file instead of standard output.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Truncation constant relative to `--bound` agents.
    Truncate {
        protocol: String,
        /// Largest population in the truncation box.
        #[arg(long, default_value_t = 6)]
        bound: u32,
        /// Check this constant instead of the computed one.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Careful execution from one agent.
    Careful {
        protocol: String,
        /// `a,b` for the threshold `max(a - b*k, 0)`; the large default
        /// threshold otherwise.
        #[arg(long = "toy-F", value_name = "A,B", value_parser = parse_toy)]
        toy_f: Option<ToyF>,
        /// Output file instead of standard output.
        #[arg(short)]
        o: Option<PathBuf>,
    },
    /// Compares one agent with two through the careful execution.
    Twoagent {
        protocol: String,
        /// `a,b` for the threshold `max(a - b*k, 0)`.
        #[arg(long = "toy-F", value_name = "A,B", value_parser = parse_toy)]
        toy_f: Option<ToyF>,
        /// Output file instead of standard output.
        #[arg(short)]
        o: Option<PathBuf>,
    },
}

fn parse_cap(s: &str) -> Result<PacketCap, String> {
    if s == "unbounded" {
        return Ok(PacketCap::Unbounded);
    }
    s.parse::<u32>()
        .map(PacketCap::Finite)
        .map_err(|_| format!("`{s}` is neither a number nor `unbounded`"))
}

fn parse_counts(s: &str) -> Result<u32, String> {
    s.trim().parse::<u32>().map_err(|_| format!("`{s}` is not a count"))
}

fn parse_toy(s: &str) -> Result<ToyF, String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("`{t}` is not a number"));
    Ok(ToyF { a: num(a)?, b: num(b)? })
}

/// A protocol with the defaults that come with it.
struct Loaded {
    spec: ProtocolSpec,
    expected: Option<Expected>,
    bound: Option<u32>,
    cap: Option<PacketCap>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

/// A file if one exists at `name`, a built-in otherwise.
fn load(name: &str) -> Result<Loaded, CliError> {
    let path = Path::new(name);
    if path.is_file() {
        return Ok(Loaded {
            spec: parse_protocol(&read(path)?)?,
            expected: None,
            bound: None,
            cap: None,
        });
    }
    let e = corpus::builtin(name)?;
    Ok(Loaded {
        spec: e.spec,
        expected: e.expected,
        bound: Some(e.bound),
        cap: Some(e.packet_cap),
    })
}

struct Ctx<'a> {
    g: &'a Global,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn text(&mut self, s: impl AsRef<str>) {
        if !self.g.json {
            let _ = writeln!(self.out, "{}", s.as_ref());
        }
    }

    fn json(&mut self, v: Value) {
        if self.g.json {
            let _ = writeln!(self.out, "{v}");
        }
    }

    /// The protocol, checked against its class, with loss switched on if asked.
    fn protocol(&self, name: &str) -> Result<Loaded, CliError> {
        let mut l = load(name)?;
        let violations = validate_protocol(&l.spec);
        if let Some(v) = violations.first() {
            return Err(CliError::Format(format!("invalid protocol `{}`: {v}", l.spec.name)));
        }
        if self.g.unreliable {
            l.spec.unreliable = true;
        }
        Ok(l)
    }

    fn cap(&self, l: &Loaded) -> PacketCap {
        self.g.packet_cap.or(l.cap).unwrap_or(if l.spec.produces_packets() {
            PacketCap::Finite(3)
        } else {
            PacketCap::Finite(0)
        })
    }

    fn max_agents(&self, l: &Loaded) -> u32 {
        self.g.max_agents.or(l.bound).unwrap_or(4)
    }

    fn limits(&self, l: &Loaded) -> GraphLimits {
        let limits = GraphLimits::new(self.cap(l));
        match self.g.budget_nodes {
            Some(n) => limits.with_max_nodes(n),
            None => limits,
        }
    }

    fn verify_options(&self, l: &Loaded) -> VerifyOptions {
        VerifyOptions {
            max_agents: self.max_agents(l),
            packet_cap: self.cap(l),
            max_nodes: self.limits(l).max_nodes,
        }
    }
}

fn cap_json(cap: PacketCap) -> Value {
    match cap {
        PacketCap::Finite(k) => json!(k),
        PacketCap::Unbounded => json!("unbounded"),
    }
}

fn trace_lines(spec: &ProtocolSpec, t: &ExecutionTrace) -> Vec<String> {
    t.to_text(spec).lines().map(str::to_owned).collect()
}

fn output_json(o: Output) -> Value {
    match o {
        Output::Consensus(b) => json!(b),
        Output::Mixed => json!("mixed"),
    }
}

fn initial(spec: &ProtocolSpec, x: &[u32]) -> Result<IdConfig, CliError> {
    Ok(IdConfig::from_multi(&input_config(spec, x)?))
}

/// Parses `argv` (without the program name), runs the command and returns
/// the exit code: 0 pass, 1 verdict failure, 2 usage error, 3 resource limit.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli =
        match Cli::try_parse_from(std::iter::once(OsString::from("popver")).chain(argv.into_iter().map(Into::into))) {
            Ok(cli) => cli,
            Err(e) => {
                let text = e.render().to_string();
                if e.use_stderr() {
                    let _ = write!(err, "{text}");
                } else {
                    let _ = write!(out, "{text}");
                }
                return e.exit_code();
            }
        };
    let mut ctx = Ctx { g: &cli.global, out };
    match dispatch(&mut ctx, &cli.command) {
        Ok(passed) => i32::from(!passed),
        Err(e) => {
            if cli.global.json {
                let _ = writeln!(ctx.out, "{}", json!({"error": e.to_string(), "exit": e.exit_code()}));
            }
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// `Ok(true)` on a passing verdict.
fn dispatch(ctx: &mut Ctx<'_>, command: &Command) -> Result<bool, CliError> {
    match command {
        Command::List => list(ctx),
        Command::Validate { protocol } => validate(ctx, protocol),
        Command::Simulate {
            protocol,
            input,
            steps,
            adversarial,
        } => simulate(ctx, protocol, input, *steps, *adversarial),
        Command::Verify { protocol, pred, table } => verify(ctx, protocol, pred.as_deref(), table.as_deref()),
        Command::Synth { expr, sigma, o } => synth(ctx, expr, sigma, o.as_deref()),
        Command::Graph { protocol, input, o } => graph(ctx, protocol, input, o.as_deref()),
        Command::Shadow {
            protocol,
            agents,
            oracle,
            max_len,
            o,
        } => shadow(ctx, protocol, *agents, *oracle, *max_len, o.as_deref()),
        Command::Truncate { protocol, bound, k } => truncate(ctx, protocol, *bound, *k),
        Command::Careful { protocol, toy_f, o } => careful(ctx, protocol, toy_f.as_ref(), o.as_deref()),
        Command::Twoagent { protocol, toy_f, o } => twoagent(ctx, protocol, toy_f.as_ref(), o.as_deref()),
    }
}

fn list(ctx: &mut Ctx<'_>) -> Result<bool, CliError> {
    for name in NAMES {
        let e = corpus::builtin(name)?;
        ctx.text(format!("{name:<14} {:<23} {}", e.spec.kind, e.note));
        ctx.json(json!({
            "name": name,
            "kind": e.spec.kind.as_str(),
            "unreliable": e.spec.unreliable,
            "bound": e.bound,
            "packet_cap": cap_json(e.packet_cap),
            "note": e.note,
        }));
    }
    Ok(true)
}

fn validate(ctx: &mut Ctx<'_>, name: &str) -> Result<bool, CliError> {
    let path = Path::new(name);
    let mut problems: Vec<String> = Vec::new();
    let spec = if path.is_file() {
        let text = read(path)?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Format(format!("not JSON: {e}")))?;
        problems.extend(schema_errors(&doc));
        if problems.is_empty() {
            Some(parse_protocol(&text)?)
        } else {
            None
        }
    } else {
        Some(corpus::builtin(name)?.spec)
    };
    if let Some(spec) = &spec {
        problems.extend(validate_protocol(spec).iter().map(|v| v.to_string()));
    }
    let label = spec.as_ref().map_or(name.to_string(), |s| s.name.clone());
    if problems.is_empty() {
        ctx.text(format!("{label}: valid"));
    } else {
        ctx.text(format!("{label}: {} problem(s)", problems.len()));
        for p in &problems {
            ctx.text(format!("  {p}"));
        }
    }
    ctx.json(json!({"command": "validate", "protocol": label, "valid": problems.is_empty(), "problems": problems}));
    Ok(problems.is_empty())
}

fn simulate(ctx: &mut Ctx<'_>, name: &str, input: &[u32], steps: usize, adversarial: bool) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let init = initial(&l.spec, input)?;
    let cap = ctx.cap(&l);
    let t = if adversarial {
        adversarial_execution(&l.spec, &init, 0, steps, cap)
    } else {
        random_execution(&l.spec, &init, ctx.g.seed, steps, cap)
    };
    let last = t.last().project(&l.spec);
    ctx.text(t.to_text(&l.spec).trim_end());
    ctx.json(json!({
        "command": "simulate",
        "protocol": l.spec.name,
        "seed": ctx.g.seed,
        "trace": trace_lines(&l.spec, &t),
        "final": config_line(&l.spec, &last),
        "output": output_json(output_of(&l.spec, &last)),
    }));
    Ok(true)
}

fn report_verify(ctx: &mut Ctx<'_>, spec: &ProtocolSpec, r: &VerifyReport) {
    for res in &r.results {
        let verdict = match (res.passed, res.inconclusive) {
            (true, false) => "ok",
            (true, true) => "inconclusive",
            _ => "FAIL",
        };
        ctx.text(format!(
            "  {:?} -> {}  {verdict}  ({} nodes)",
            res.input, res.expected, res.nodes
        ));
        ctx.json(json!({
            "input": res.input,
            "expected": res.expected,
            "passed": res.passed,
            "inconclusive": res.inconclusive,
            "nodes": res.nodes,
            "capped": res.capped,
        }));
    }
    if let Some(cx) = &r.counterexample {
        ctx.text(format!("counterexample for {:?}: {}", cx.input, cx.reason));
        ctx.text(cx.trace.to_text(spec).trim_end());
    }
    ctx.text(format!("{} ({})", if r.passed() { "PASS" } else { "FAIL" }, r.label()));
    ctx.json(json!({
        "command": "verify",
        "protocol": spec.name,
        "passed": r.passed(),
        "label": r.label(),
        "capped": r.capped,
        "counterexample": r.counterexample.as_ref().map(|cx| json!({
            "input": cx.input,
            "reason": cx.reason,
            "settles_on": cx.settles_on,
            "trace": trace_lines(spec, &cx.trace),
        })),
    }));
}

fn verify(ctx: &mut Ctx<'_>, name: &str, pred: Option<&str>, table: Option<&Path>) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let opts = ctx.verify_options(&l);
    let expected: Option<Box<dyn Expectation>> = match (pred, table, &l.expected) {
        (Some(text), _, _) => Some(Box::new(
            parse_predicate(text, &l.spec.sigma).map_err(popver_core::Error::from)?,
        )),
        (_, Some(path), _) => Some(Box::new(parse_table(&read(path)?)?)),
        (_, _, Some(Expected::Predicate(p))) => Some(Box::new(p.clone())),
        (_, _, Some(Expected::Table(t))) => Some(Box::new(t.clone())),
        _ => None,
    };
    ctx.text(format!(
        "{}: populations 1..={}, packet cap {}",
        l.spec.name,
        opts.max_agents,
        cap_json(opts.packet_cap)
    ));
    let Some(expected) = expected else {
        let r = is_well_specified(&l.spec, opts)?;
        let ok = r.well_specified() && r.inconclusive.is_empty();
        ctx.text(format_table(&r.table).trim_end());
        for x in &r.inconclusive {
            ctx.text(format!("  {x:?} inconclusive under the packet cap"));
        }
        if let Some(w) = &r.witness {
            ctx.text(format!("not well-specified at {:?}: {}", w.input, w.reason));
            ctx.text(w.trace.to_text(&l.spec).trim_end());
        }
        ctx.text(if ok { "well-specified" } else { "FAIL" });
        ctx.json(json!({
            "command": "verify",
            "protocol": l.spec.name,
            "passed": ok,
            "well_specified": r.well_specified(),
            "table": r.table.entries.iter().map(|(x, v)| json!([x, v])).collect::<Vec<_>>(),
            "inconclusive": r.inconclusive,
            "capped": r.capped,
            "witness": r.witness.as_ref().map(|w| json!({
                "input": w.input,
                "reason": w.reason,
                "trace": trace_lines(&l.spec, &w.trace),
            })),
        }));
        return Ok(ok);
    };
    let r = verify_implements(&l.spec, expected.as_ref(), opts)?;
    report_verify(ctx, &l.spec, &r);
    Ok(r.passed())
}

fn synth(ctx: &mut Ctx<'_>, expr: &str, sigma: &[String], o: Option<&Path>) -> Result<bool, CliError> {
    let pred = parse_predicate(expr, sigma).map_err(popver_core::Error::from)?;
    let spec = synthesize_io_protocol_over(&pred, sigma)?;
    let text = protocol_to_json(&spec);
    match o {
        Some(path) => {
            write_file(path, &text)?;
            ctx.text(format!(
                "{}: {} states written to {}",
                spec.name,
                spec.num_states(),
                path.display()
            ));
        }
        None => ctx.text(text.trim_end()),
    }
    ctx.json(json!({
        "command": "synth",
        "protocol": spec.name,
        "states": spec.num_states(),
        "file": o.map(|p| p.display().to_string()),
        "spec": if o.is_none() { serde_json::from_str::<Value>(&text).ok() } else { None },
    }));
    Ok(true)
}

fn graph(ctx: &mut Ctx<'_>, name: &str, input: &[u32], o: Option<&Path>) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let g = build_reach_graph(&l.spec, &input_config(&l.spec, input)?, ctx.limits(&l))?;
    let dot = graph_to_dot(&l.spec, &g);
    let terminal = (0..g.scc_count()).filter(|s| g.is_terminal_scc(*s)).count();
    match o {
        Some(path) => {
            write_file(path, &dot)?;
            ctx.text(format!(
                "{} configurations, {} terminal SCCs{}, written to {}",
                g.len(),
                terminal,
                if g.capped() { " (packet cap reached)" } else { "" },
                path.display()
            ));
        }
        None => ctx.text(dot.trim_end()),
    }
    ctx.json(json!({
        "command": "graph",
        "protocol": l.spec.name,
        "nodes": g.len(),
        "edges": g.edges().len(),
        "terminal_sccs": terminal,
        "capped": g.capped(),
        "file": o.map(|p| p.display().to_string()),
    }));
    Ok(true)
}

fn shadow(
    ctx: &mut Ctx<'_>,
    name: &str,
    agents: u32,
    oracle: bool,
    max_len: usize,
    o: Option<&Path>,
) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let limits = ctx.limits(&l);
    let xs: Vec<Vec<u32>> = inputs(l.spec.sigma.len(), agents)
        .into_iter()
        .filter(|x| x.iter().sum::<u32>() == agents)
        .collect();
    let mut all = true;
    let mut file = String::new();
    for x in &xs {
        let init = initial(&l.spec, x)?;
        if oracle {
            let found = shadow_extension_exists(&l.spec, &init, max_len, limits)?;
            all &= found.is_some();
            ctx.text(format!(
                "{x:?}: {}",
                if found.is_some() {
                    "shadow extension found"
                } else {
                    "no shadow extension"
                }
            ));
            if let Some(t) = &found {
                file.push_str(&format!("## input {x:?}\n{}", t.to_text(&l.spec)));
            }
            ctx.json(json!({
                "command": "shadow",
                "input": x,
                "oracle": true,
                "max_len": max_len,
                "exists": found.is_some(),
                "trace": found.as_ref().map(|t| trace_lines(&l.spec, t)),
            }));
            continue;
        }
        let run = build_shadow_extension(&l.spec, &init, limits, DEFAULT_MAX_STEPS)?;
        let mut failures = Vec::new();
        for (a, ext) in &run.extensions {
            if let Err(v) = check_shadow_extension(&l.spec, ext, limits.packet_cap) {
                failures.push(format!("agent {}: {} at index {}", a.0, v.reason, v.index));
            }
        }
        all &= failures.is_empty();
        let shadows: usize = run.extensions.values().map(|e| e.shadows.len()).sum();
        ctx.text(format!(
            "{x:?}: base of {} steps, {shadows} shadows, {} replacements, {}",
            run.base.len(),
            run.replacements,
            if failures.is_empty() {
                "checked".to_string()
            } else {
                failures.join("; ")
            }
        ));
        file.push_str(&format!("### input {x:?}\n{}", shadow_run_to_text(&l.spec, &run)));
        ctx.json(json!({
            "command": "shadow",
            "input": x,
            "base_steps": run.base.len(),
            "shadows": shadows,
            "replacements": run.replacements,
            "adjusted": run.adjusted.len(),
            "passed": failures.is_empty(),
            "failures": failures,
        }));
    }
    if let Some(path) = o {
        write_file(path, &file)?;
    }
    Ok(all)
}

fn truncate(ctx: &mut Ctx<'_>, name: &str, bound: u32, k: Option<u32>) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let limits = ctx.limits(&l);
    let r = find_truncation_constant(&l.spec, bound, limits.packet_cap, limits.max_nodes)?;
    let k = k.unwrap_or(r.k);
    let violation = check_truncatable_at(&l.spec, k, bound, limits.packet_cap, limits.max_nodes)?;
    let minimal: Vec<String> = r.minimal.iter().map(|c| config_line(&l.spec, c)).collect();
    ctx.text(format!(
        "{}: K = {} relative to {bound} agents ({} configurations)",
        l.spec.name, r.k, r.configs
    ));
    for m in &minimal {
        ctx.text(format!("  minimal non-stable: {m}"));
    }
    match &violation {
        None => ctx.text(format!("K = {k} holds up to {bound} agents")),
        Some(v) => ctx.text(format!(
            "K = {k} fails: {} is a stable consensus but not after adding an agent in {}",
            config_line(&l.spec, &v.config),
            l.spec.state_name(v.state)
        )),
    }
    ctx.json(json!({
        "command": "truncate",
        "protocol": l.spec.name,
        "bound": bound,
        "k": r.k,
        "checked_k": k,
        "minimal": minimal,
        "capped": r.capped,
        "passed": violation.is_none(),
        "violation": violation.as_ref().map(|v| json!({
            "config": config_line(&l.spec, &v.config),
            "state": l.spec.state_name(v.state),
        })),
    }));
    Ok(violation.is_none())
}

fn threshold(toy: Option<&ToyF>) -> &dyn ThresholdF {
    match toy {
        Some(f) => f,
        None => &FullF,
    }
}

fn careful_options<'f>(ctx: &Ctx<'_>, l: &Loaded, f: &'f dyn ThresholdF) -> CarefulOptions<'f> {
    let mut opts = CarefulOptions::new(f, ctx.cap(l));
    opts.max_nodes = ctx.limits(l).max_nodes;
    opts
}

fn careful(ctx: &mut Ctx<'_>, name: &str, toy: Option<&ToyF>, o: Option<&Path>) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let f = threshold(toy);
    let c = build_careful_execution(&l.spec, careful_options(ctx, &l, f))?;
    let careless = check_careful(&l.spec, &c.trace, f, ctx.cap(&l))?;
    let expendable: Vec<&str> = c.expendable.iter().map(|m| l.spec.message_name(*m)).collect();
    ctx.text(format!(
        "{}: {} steps, target moment {}, stable from {}, value {}",
        l.spec.name,
        c.trace.len(),
        c.target_moment,
        c.phase3_end,
        c.value
    ));
    ctx.text(format!(
        "expendable: {{{}}}{}",
        expendable.join(", "),
        if c.capped {
            ", first phase stopped by the packet cap"
        } else {
            ""
        }
    ));
    match careless {
        None => ctx.text("careful"),
        Some(i) => ctx.text(format!("careless step at {i}")),
    }
    if let Some(path) = o {
        write_file(path, &c.trace.to_text(&l.spec))?;
    }
    ctx.json(json!({
        "command": "careful",
        "protocol": l.spec.name,
        "steps": c.trace.len(),
        "phase2_start": c.phase2_start,
        "target_moment": c.target_moment,
        "phase3_end": c.phase3_end,
        "value": c.value,
        "expendable": expendable,
        "claims": c.claims.iter().map(|cl| json!({"index": cl.index, "holds": cl.holds})).collect::<Vec<_>>(),
        "capped": c.capped,
        "careless_at": careless,
        "passed": careless.is_none(),
    }));
    Ok(careless.is_none())
}

fn twoagent(ctx: &mut Ctx<'_>, name: &str, toy: Option<&ToyF>, o: Option<&Path>) -> Result<bool, CliError> {
    let l = ctx.protocol(name)?;
    let f = threshold(toy);
    let r = two_agent_equivalence_check(&l.spec, careful_options(ctx, &l, f))?;
    let same = match r.verdict {
        TwoAgentVerdict::SameValue(b) => {
            ctx.text(format!("{}: one and two agents both settle on {b}", l.spec.name));
            Some(b)
        }
        TwoAgentVerdict::NotWellSpecified => {
            ctx.text(format!("{}: not well-specified for one or two agents", l.spec.name));
            None
        }
    };
    if let Some(path) = o {
        write_file(path, &r.joint.to_text(&l.spec))?;
    }
    ctx.json(json!({
        "command": "twoagent",
        "protocol": l.spec.name,
        "same_value": same,
        "careful_value": r.careful.value,
        "joint_value": r.joint_value,
        "joint_steps": r.joint.len(),
        "passed": same.is_some(),
    }));
    Ok(same.is_some())
}
