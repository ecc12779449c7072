//! One line per acceptance criterion, then a non-zero exit if any failed.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use popver_core::config::{IdConfig, MultiConfig};
use popver_core::constructions::asynchronous::ToyF;
use popver_core::constructions::careful::{
    build_careful_execution, check_careful, two_agent_equivalence_check, CarefulOptions, TwoAgentVerdict,
};
use popver_core::constructions::shadow::{
    build_shadow_extension, check_shadow_extension, shadow_extension_exists, DEFAULT_MAX_STEPS,
};
use popver_core::constructions::truncation::{check_truncatable_at, find_truncation_constant};
use popver_core::corpus::{self, NAMES};
use popver_core::fairness::{check_fairness, fair_schedule};
use popver_core::graph::GraphLimits;
use popver_core::predicate::{parse_predicate, synthesize_io_protocol, CountingPredicate};
use popver_core::protocol::{PacketCap, ProtocolSpec};
use popver_core::simulate::adversarial_execution;
use popver_core::step::{input_config, output_of, Output};
use popver_core::trace::{validate_trace, ExecutionTrace};
use popver_core::unreliable::is_unreliable_variant;
use popver_core::verify::{
    converges_under_activity, inputs, verify_implements, Expectation, FnExpectation, VerifyOptions,
};
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

const EQUALITY: [&str; 4] = ["eq_pp", "eq_io", "eq_qt", "eq_bcast"];

fn cap_of(name: &str) -> PacketCap {
    corpus::builtin(name).unwrap().packet_cap
}

fn equality_at(unreliable: bool, bound: u32) -> Outcome {
    let phi = corpus::equality_predicate();
    let mut nodes = 0;
    for name in EQUALITY {
        let spec = corpus::builtin(name).unwrap().spec.with_unreliable(unreliable);
        let r = verify_implements(&spec, &phi, VerifyOptions::new(bound, cap_of(name))).map_err(err)?;
        ensure(r.passed(), || {
            format!("{name} fails at {:?}", r.counterexample.as_ref().map(|c| &c.input))
        })?;
        nodes += r.results.iter().map(|x| x.nodes).sum::<usize>();
    }
    Ok(format!("4 protocols, populations 1..={bound}, {nodes} graph nodes"))
}

fn criterion_1() -> Outcome {
    equality_at(false, 5)
}

fn criterion_2() -> Outcome {
    equality_at(true, 4)
}

fn criterion_3() -> Outcome {
    let spec = corpus::parity();
    let table = corpus::parity_table(8);
    let opts = |n| VerifyOptions::new(n, PacketCap::Finite(0));
    let reliable = verify_implements(&spec, &table, opts(5)).map_err(err)?;
    ensure(reliable.passed(), || "reliable parity fails".into())?;
    let lossy = spec.with_unreliable(true);
    let r = verify_implements(&lossy, &table, opts(2)).map_err(err)?;
    let cx = r.counterexample.ok_or("unreliable parity passes")?;
    ensure(cx.input.iter().sum::<u32>() <= 2, || {
        format!("failing input {:?}", cx.input)
    })?;
    validate_trace(&lossy, &cx.trace, PacketCap::Finite(0)).map_err(err)?;
    let last = cx.trace.last().project(&lossy);
    let start = cx.trace.lasso_start.ok_or("counterexample is not a lasso")?;
    let settled = cx.trace.configs[start..]
        .iter()
        .all(|c| output_of(&lossy, &c.project(&lossy)) == output_of(&lossy, &last));
    ensure(settled, || "counterexample cycle changes output".into())?;
    let want = table.expected(&cx.input).map_err(err)?;
    ensure(output_of(&lossy, &last) != Output::Consensus(want), || {
        "counterexample ends correct".into()
    })?;
    Ok(format!(
        "counterexample at x = {:?}, {} steps",
        cx.input,
        cx.trace.len()
    ))
}

fn criterion_4() -> Outcome {
    let mut preds: Vec<(String, CountingPredicate)> = (1..=3)
        .map(|c| {
            let text = format!("x0 >= {c}");
            let p = parse_predicate(&text, &["0".to_string()]).unwrap();
            (text, p)
        })
        .collect();
    preds.push((corpus::EQUALITY.to_string(), corpus::equality_predicate()));
    let limits = GraphLimits::new(PacketCap::Finite(0));
    for (text, pred) in &preds {
        let spec = synthesize_io_protocol(pred).map_err(err)?;
        let r = verify_implements(&spec, pred, VerifyOptions::new(6, PacketCap::Finite(0))).map_err(err)?;
        ensure(r.passed(), || format!("`{text}` fails under the fair scheduler"))?;
        for x in inputs(pred.arity, 6) {
            let want = pred.eval(&x).map_err(err)?;
            let ok = converges_under_activity(&spec, &x, want, limits).map_err(err)?;
            ensure(ok, || {
                format!("`{text}` at {x:?} has an activity-only run that does not settle")
            })?;
            let init = IdConfig::from_multi(&input_config(&spec, &x).map_err(err)?);
            let t = adversarial_execution(&spec, &init, 3, 200, PacketCap::Finite(0));
            let end = output_of(&spec, &t.last().project(&spec));
            ensure(t.lasso_start.is_some() && end == Output::Consensus(want), || {
                format!("`{text}` at {x:?}: adversarial run ends in {end:?}")
            })?;
        }
    }
    Ok("x0>=1, x0>=2, x0>=3 and equality, populations 1..=6, fair and activity-only".into())
}

fn criterion_5() -> Outcome {
    let limits = GraphLimits::new(PacketCap::Finite(0));
    let mut runs = 0;
    for name in ["eq_pp", "eq_io", "eq_bcast", "threshold(2)"] {
        let spec = corpus::builtin(name).unwrap().spec.with_unreliable(true);
        for x in inputs(spec.sigma.len(), 3)
            .into_iter()
            .filter(|x| x.iter().sum::<u32>() >= 2)
        {
            let init = IdConfig::from_multi(&input_config(&spec, &x).map_err(err)?);
            let run = build_shadow_extension(&spec, &init, limits, DEFAULT_MAX_STEPS).map_err(err)?;
            ensure(check_fairness(&spec, &run.base, limits).map_err(err)?.fair, || {
                format!("{name} {x:?}: base not fair")
            })?;
            ensure(run.replacements <= init.agents.len() * spec.num_states(), || {
                format!("{name} {x:?}: {} replacements", run.replacements)
            })?;
            for (k, step) in &run.adjusted {
                let next = &run.base.configs[k + 1];
                let justified = popver_core::step::id_successors(&spec, &step.pre, PacketCap::Finite(0))
                    .iter()
                    .any(|b| b.active == step.active && is_unreliable_variant(b, next));
                ensure(justified, || {
                    format!("{name} {x:?}: weakened step at {k} is not a lossy variant")
                })?;
            }
            ensure(run.extensions.len() == init.agents.len(), || {
                format!("{name} {x:?}: missing extensions")
            })?;
            for ext in run.extensions.values() {
                check_shadow_extension(&spec, ext, PacketCap::Finite(0)).map_err(|v| format!("{name} {x:?}: {v:?}"))?;
                let grows = ext.reachable.windows(2).all(|w| w[0].is_subset(&w[1]));
                ensure(grows, || format!("{name} {x:?}: reachable sets shrink"))?;
                let covers = ext
                    .base
                    .configs
                    .iter()
                    .zip(&ext.reachable)
                    .all(|(c, r)| r.contains(&c.agents[&ext.agent]));
                ensure(covers, || {
                    format!("{name} {x:?}: agent state missing from its reachable set")
                })?;
            }
            runs += 1;
        }
    }
    let plusminus = corpus::plusminus();
    let init = IdConfig::from_multi(&MultiConfig::from_counts(vec![2, 0, 0], vec![]));
    let found = shadow_extension_exists(&plusminus, &init, 8, limits).map_err(err)?;
    ensure(found.is_none(), || "plusminus admits a shadow extension".into())?;
    Ok(format!("{runs} shadow runs checked; plusminus has none up to length 8"))
}

fn criterion_6() -> Outcome {
    let mut ks = Vec::new();
    let mut refuted = Vec::new();
    for name in NAMES {
        let e = corpus::builtin(name).unwrap();
        let nodes = GraphLimits::DEFAULT_MAX_NODES;
        let r = find_truncation_constant(&e.spec, 6, e.packet_cap, nodes).map_err(err)?;
        let v = check_truncatable_at(&e.spec, r.k, 6, e.packet_cap, nodes).map_err(err)?;
        ensure(v.is_none(), || format!("{name}: K = {} refuted by {v:?}", r.k))?;
        if check_truncatable_at(&e.spec, 0, 6, e.packet_cap, nodes)
            .map_err(err)?
            .is_some()
        {
            refuted.push(name);
        }
        ks.push(format!("{name}={}", r.k));
    }
    ensure(!refuted.is_empty(), || "K = 0 passes everywhere".into())?;
    Ok(format!("K: {}; K=0 fails for {}", ks.join(" "), refuted.join(" ")))
}

fn criterion_7() -> Outcome {
    let f = ToyF { a: 4, b: 1 };
    let spec = corpus::qt_atleast2();
    let cap = PacketCap::Finite(8);
    let c = build_careful_execution(&spec, CarefulOptions::new(&f, cap)).map_err(err)?;
    let first = check_careful(&spec, &c.trace, &f, cap).map_err(err)?;
    ensure(first.is_none(), || format!("careless step at {first:?}"))?;
    ensure(c.claims.iter().all(|cl| cl.holds), || "an abundance claim fails".into())?;
    let report = two_agent_equivalence_check(&spec, CarefulOptions::new(&f, cap)).map_err(err)?;
    let TwoAgentVerdict::SameValue(b) = report.verdict else {
        return Err("verdict: not well-specified".into());
    };
    let entry = corpus::builtin("qt_atleast2").unwrap();
    for n in 1..=2u32 {
        let constant = FnExpectation {
            arity: 1,
            f: move |_: &[u32]| b,
        };
        let only_n = |x: &[u32]| x[0] == n;
        let r = verify_implements(&spec, &constant, VerifyOptions::new(2, entry.packet_cap)).map_err(err)?;
        let at_n: Vec<_> = r.results.iter().filter(|res| only_n(&res.input)).collect();
        ensure(at_n.iter().all(|res| res.passed && !res.inconclusive), || {
            format!("model checker disagrees at n = {n}")
        })?;
    }
    Ok(format!("careful value {}, same value {b} at n = 1 and n = 2", c.value))
}

fn criterion_8() -> Outcome {
    let mut lassos = 0;
    for name in NAMES {
        let e = corpus::builtin(name).unwrap();
        let limits = GraphLimits::new(e.packet_cap);
        for x in inputs(e.spec.sigma.len(), 4) {
            let init = IdConfig::from_multi(&input_config(&e.spec, &x).map_err(err)?);
            let t = fair_schedule(&e.spec, &init, limits).map_err(err)?;
            let v = check_fairness(&e.spec, &t, limits).map_err(err)?;
            ensure(v.fair, || format!("{name} {x:?}: fair_schedule output judged unfair"))?;
            lassos += 1;
        }
    }
    let spec = corpus::eq_pp();
    let mut unfair = ExecutionTrace::new(IdConfig::from_multi(&MultiConfig::from_counts(vec![1, 1, 0], vec![])));
    unfair.push_stutter();
    unfair.lasso_start = Some(0);
    let v = check_fairness(&spec, &unfair, GraphLimits::new(PacketCap::Finite(0))).map_err(err)?;
    ensure(!v.fair, || {
        "stuttering before a reachable terminal SCC is accepted".into()
    })?;
    Ok(format!(
        "{lassos} fair lassos accepted, hand-built unfair lasso rejected"
    ))
}

fn criterion_9() -> Outcome {
    let fixtures = common::axiom_fixtures();
    let exhaustive = common::exhaustive_axioms(&fixtures)?;
    let mut runner = TestRunner::new(Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    });
    let generated = std::cell::Cell::new(0);
    runner
        .run(
            &common::strategy::case(fixtures.len()),
            |(f, agents, packets, targets, flip)| {
                generated.set(generated.get() + 1);
                let spec: &ProtocolSpec = &fixtures[f];
                let c = common::id_config(spec, &agents, &packets);
                let r = common::strategy::renaming(&agents, &packets, &targets, flip);
                common::all_axioms(spec, &c, &r).map_err(TestCaseError::fail)
            },
        )
        .map_err(|e| e.to_string())?;
    let generated = generated.get();
    ensure(generated >= 10_000, || format!("only {generated} cases"))?;
    Ok(format!(
        "{} protocols over {} kinds, {exhaustive} exhaustive and {generated} generated cases, 0 violations",
        fixtures.len(),
        popver_core::protocol::Kind::ALL.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("equality protocols agree on all inputs up to 5 agents", criterion_1),
        ("unreliable equality protocols agree up to 4 agents", criterion_2),
        ("parity survives without loss and breaks with it", criterion_3),
        ("synthesized protocols converge, fair and activity-only", criterion_4),
        ("shadow extensions exist and check; plusminus has none", criterion_5),
        ("truncation constants at agent bound 6", criterion_6),
        ("careful execution and one-versus-two agents", criterion_7),
        ("fair schedules are fair; an unfair lasso is not", criterion_8),
        ("step axioms over small configurations", criterion_9),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
