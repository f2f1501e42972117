//! End-to-end acceptance criteria. Runs without the libtest harness so each
//! criterion prints exactly one PASS/FAIL line, then exits non-zero if any
//! failed.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_yaml::Value;

use dds_core::attribution::{route, Approvals, Classifier, Layer, LogEvent, RouteContext, SignalClass};
use dds_core::harness::{run_tiers, FaultClass, FaultInjection, ImageRegistry, SimulatedRunner, TierStatus};
use dds_core::operator::{
    check_reachability, validate_dag, OperatorDag, OperatorTypeDef, OperatorTypeRegistry, ViolationCode,
};
use dds_core::planner::{audit_plan, select_products_detailed};
use dds_core::skill::Ablation;
use oracles::*;

type Check = Result<String, String>;

fn dds(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dds"))
        .arg("--workdir")
        .arg(dir)
        .args(["--clock", "2026-01-01T00:00:00Z"])
        .args(args)
        .output()
        .expect("dds runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixture_path(rel: &str) -> String {
    fixtures().join(rel).to_string_lossy().into_owned()
}

fn ensure(ok: bool, why: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why.into())
    }
}

fn trading_cycle() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = dds(
        dir.path(),
        &[
            "cycle",
            "--intent",
            &fixture_path("trading_intent.yaml"),
            "--skills",
            &fixture_path("skills"),
        ],
    );
    let elapsed = started.elapsed();
    let text = stdout(&out);
    ensure(out.status.code() == Some(0), format!("exit {:?}: {text}", out.status.code()))?;
    ensure(text.contains("T0 ✓ T1 ✓ T2 ✓"), format!("tiers: {text}"))?;
    ensure(elapsed < Duration::from_secs(5), format!("took {elapsed:?}"))?;

    let validation: Value = serde_yaml::from_str(&std::fs::read_to_string(dir.path().join("validation.yaml")).unwrap()).unwrap();
    let count = |k: &str| validation[k].as_sequence().map_or(0, Vec::len);
    ensure(count("hard_errors") == 0 && count("soft_warnings") == 1, "expected 0 hard / 1 soft")?;

    let dag_text = std::fs::read_to_string(dir.path().join("dag.yaml")).unwrap();
    let dag = OperatorDag::from_yaml(&dag_text).unwrap();
    let types: BTreeMap<&str, &str> = dag.nodes.iter().map(|n| (n.id.as_str(), n.op_type.as_str())).collect();
    let want_types = BTreeMap::from([
        ("ingest", "INGEST"),
        ("queue", "QUEUE"),
        ("transform", "TRANSFORM"),
        ("analytics_store", "STORE"),
        ("operational_store", "STORE"),
        ("cache", "CACHE"),
    ]);
    ensure(types == want_types, format!("topology {types:?}"))?;
    let edges: BTreeSet<(&str, &str)> = dag.edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).collect();
    let want_edges = BTreeSet::from([
        ("ingest", "queue"),
        ("queue", "transform"),
        ("transform", "analytics_store"),
        ("transform", "operational_store"),
        ("transform", "cache"),
    ]);
    ensure(edges == want_edges, format!("edges {edges:?}"))?;

    let plan: Value = serde_yaml::from_str(&std::fs::read_to_string(dir.path().join("plan.yaml")).unwrap()).unwrap();
    let bound = |n: &str| plan["bindings"][n]["system"].as_str().unwrap_or_default().to_string();
    let bindings = [
        ("queue", "kafka"),
        ("analytics_store", "clickhouse"),
        ("operational_store", "postgresql"),
        ("cache", "redis"),
    ];
    for (node, sys) in bindings {
        ensure(bound(node) == sys, format!("{node} bound to {}", bound(node)))?;
    }
    let connector = plan["connectors"]["transform->analytics_store"]["connector"].as_str().unwrap_or_default();
    ensure(connector == "kafka_engine_materialized_view", format!("analytics connector {connector}"))?;
    Ok(format!("4 systems, {} ms", elapsed.as_millis()))
}

fn latency_rejection() -> Check {
    let p = pipeline(&trading_intent(), &catalog("skills"));
    let mut dag = p.dag.clone();
    dag.edge_mut("transform", "analytics_store").unwrap().latency_contribution_ms = Some(2500.0);
    let verdict = validate_dag(&dag, &p.intent, &OperatorTypeRegistry::default());
    let hit = verdict
        .violations
        .iter()
        .any(|v| v.code == ViolationCode::PatternSloLatency && v.subject == "analytics_store");
    ensure(hit, format!("violations {:?}", verdict.codes()))?;

    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path();
    ensure(dds(wd, &["validate", &fixture_path("trading_intent.yaml")]).status.success(), "validate failed")?;
    ensure(dds(wd, &["plan", "--skills", &fixture_path("skills")]).status.success(), "plan failed")?;
    ensure(dds(wd, &["render"]).status.success(), "render failed")?;
    ensure(wd.join("artifacts").exists(), "render wrote nothing")?;
    let inflated = wd.join("inflated.yaml");
    std::fs::write(&inflated, dag.to_yaml()).unwrap();
    let out = dds(wd, &["plan", "--dag", inflated.to_str().unwrap()]);
    ensure(out.status.code() == Some(1), format!("plan --dag exit {:?}", out.status.code()))?;
    let err = String::from_utf8_lossy(&out.stderr).into_owned() + &stdout(&out);
    ensure(err.contains("PATTERN_SLO_LATENCY"), format!("output: {err}"))?;
    ensure(!wd.join("artifacts").exists(), "artifacts left behind")?;
    Ok("analytics path 2505 ms rejected, no artifacts".into())
}

fn injection_accuracy() -> Check {
    let p = pipeline(&trading_intent(), &catalog("skills"));
    let images = ImageRegistry::default();
    let ctx = RouteContext {
        intent: &p.intent,
        artifacts: &p.artifacts,
        registry: &images,
    };
    let classifier = Classifier::default();
    let mut trials: Vec<(FaultInjection, Layer)> = Vec::new();
    for svc in ["queue", "analytics_store", "operational_store", "cache"] {
        trials.push((FaultInjection::new(FaultClass::ImagePullFailure, svc), Layer::L3));
        trials.push((FaultInjection::new(FaultClass::HostPortConflict, svc), Layer::L4Host));
    }
    for m in ["confluent_kafka", "clickhouse_connect", "psycopg", "redis"] {
        trials.push((FaultInjection::new(FaultClass::LibraryMissing, "ingest").with("module", m), Layer::L3));
    }
    for (svc, lag) in [("analytics_store", "2000"), ("operational_store", "3000"), ("analytics_store", "40000"), ("operational_store", "100000")] {
        trials.push((FaultInjection::new(FaultClass::DdlTypeConstraint, svc), Layer::L3));
        trials.push((FaultInjection::new(FaultClass::ConsumerLag, "queue").with("lag", lag), Layer::L2));
    }
    let mut correct = 0;
    let mut misses = Vec::new();
    for (fault, truth) in &trials {
        let report = run_tiers(&p.artifacts, &mut SimulatedRunner::new(vec![fault.clone()]), &profile("clean"));
        let signals = classifier.classify_report(&report);
        let ok = signals.len() == 1 && route(&signals[0], &ctx).first().is_some_and(|r| r.admits(*truth));
        if ok {
            correct += 1;
        } else {
            misses.push(format!("{}:{}", fault.class, fault.service));
        }
    }
    ensure(correct == trials.len() && trials.len() == 20, format!("{correct}/{} ({misses:?})", trials.len()))?;
    Ok(format!("{correct}/20 attributed"))
}

fn learning_loop() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path();
    let first = dds(
        wd,
        &[
            "cycle",
            "--intent",
            &fixture_path("trading_intent.yaml"),
            "--skills",
            &fixture_path("degraded"),
            "--profile",
            &fixture_path("profiles/busy_postgres.yaml"),
        ],
    );
    ensure(first.status.code() == Some(1), format!("cycle 1 exit {:?}", first.status.code()))?;
    let signals: Vec<Value> = serde_yaml::from_str(&std::fs::read_to_string(wd.join("signals.yaml")).unwrap()).unwrap();
    ensure(signals.len() == 4, format!("{} signals in cycle 1", signals.len()))?;
    let before: BTreeSet<(String, String)> = signals
        .iter()
        .map(|s| {
            let f = |k: &str| s[k].as_str().unwrap_or_default().to_string();
            (f("class"), f("service"))
        })
        .collect();

    let records: Vec<Value> = serde_yaml::from_str(&std::fs::read_to_string(wd.join("records.yaml")).unwrap()).unwrap();
    let approve: Vec<String> = records
        .iter()
        .filter(|e| e["record"]["layer"] == "L3" && e["record"]["companion"].as_bool() != Some(true))
        .map(|e| e["record"]["id"].as_str().unwrap().to_string())
        .collect();
    ensure(approve.len() == 3, format!("{} non-companion L3 records", approve.len()))?;
    let auto_written = records
        .iter()
        .any(|e| e["record"]["layer"] == "L4_host" && e["outcome"]["status"] == "policy_written");
    ensure(auto_written, "host policy not written automatically")?;

    let mut args = vec!["patch"];
    for id in &approve {
        args.extend(["--approve", id.as_str()]);
    }
    let patched = dds(wd, &args);
    ensure(patched.status.success(), format!("patch: {}", String::from_utf8_lossy(&patched.stderr)))?;
    ensure(stdout(&patched).contains("patch: 3 applied"), stdout(&patched))?;

    let second = dds(wd, &["cycle"]);
    let text = stdout(&second);
    ensure(second.status.code() == Some(0), format!("cycle 2: {text}"))?;
    ensure(text.contains("T0 ✓ T1 ✓ T2 ✓"), text.clone())?;
    let after: Vec<Value> = serde_yaml::from_str(&std::fs::read_to_string(wd.join("signals.yaml")).unwrap()).unwrap();
    ensure(after.is_empty(), format!("{} signals in cycle 2", after.len()))?;
    ensure(before.len() == 4, "cycle 1 signals not distinct")?;

    let log = dds_core::attribution::AttributionLog::load(&wd.join("attribution.jsonl")).unwrap();
    let cited: BTreeSet<String> = log
        .events()
        .iter()
        .filter_map(|e| match e {
            LogEvent::Citation { cycle: 2, citation, .. } => Some(citation.clone()),
            _ => None,
        })
        .collect();
    let fields = ["kafka.operational.recommended_images", "kafka.operational.required_client_libraries", "clickhouse.anti_patterns"];
    for f in fields {
        ensure(cited.iter().any(|c| c.starts_with(f)), format!("{f} not cited: {cited:?}"))?;
    }
    ensure(log.unlinked_patches().is_empty(), "an applied patch was never cited")?;
    Ok(format!("4 signals -> 0, {} citations linked", cited.len()))
}

fn ablation() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let busy = dir.path().join("busy_native.yaml");
    std::fs::write(&busy, "occupied_ports: [9000]\navailable_packages: []\npolicy_entries: []\n").unwrap();
    let host = dds_core::harness::HostProfile::from_yaml(&std::fs::read_to_string(&busy).unwrap()).unwrap();
    let intent = trading_intent();

    let mut stripped = Loop::new(catalog("skills").ablate(Ablation::OpsStripped), host.clone());
    let r = stripped.cycle(1, &intent, Vec::new(), &Approvals::none());
    let classes: BTreeSet<SignalClass> = r.signals.iter().map(|s| s.class).collect();
    let expected = classes.contains(&SignalClass::CompositionGapImage) || classes.contains(&SignalClass::HostEnvMismatch);
    ensure(expected, format!("stripped signals {classes:?}"))?;
    let artifacts = r.artifacts.as_ref().ok_or("stripped catalog rendered nothing")?;
    let ops_cited = artifacts.citation_index.iter().any(|c| c.citation.contains(".operational."));
    ensure(!ops_cited, "stripped artifacts still cite operational fields")?;

    let mut full = Loop::new(catalog("skills"), host);
    let r = full.cycle(1, &intent, Vec::new(), &Approvals::none());
    let report = r.report.as_ref().ok_or("no report")?;
    ensure(report.t1 == TierStatus::Pass, format!("full catalog: {}", report.summary()))?;
    Ok(format!("stripped: {classes:?}; full: {}", report.summary()))
}

fn chat_extension() -> Check {
    let doc = read_fixture("chat_dag.yaml");
    let dag = OperatorDag::from_yaml(&doc).unwrap();
    let intent = defaulted(&dds_core::intent::parse_intent(&read_fixture("chat_intent.yaml")).unwrap());

    let plain = OperatorTypeRegistry::default();
    let verdict = validate_dag(&dag, &intent, &plain);
    let unknown: BTreeSet<&str> = verdict
        .violations
        .iter()
        .filter(|v| v.code == ViolationCode::UnknownOperatorType)
        .map(|v| v.subject.as_str())
        .collect();
    ensure(unknown == BTreeSet::from(["router", "push", "search"]), format!("unknown {unknown:?}"))?;

    let mut reg = OperatorTypeRegistry::default();
    reg.register(OperatorTypeDef::new("ROUTE", &["QUEUE"], &["STORE", "NOTIFY"], false)).unwrap();
    reg.register(OperatorTypeDef::new("NOTIFY", &["ROUTE"], &[], true)).unwrap();
    reg.register(OperatorTypeDef::new("INDEX", &["TRANSFORM"], &[], true)).unwrap();
    let verdict = validate_dag(&dag, &intent, &reg);
    ensure(verdict.accepted(), format!("extended registry: {:?}", verdict.codes()))?;
    Ok("3 types registered, DAG accepted".into())
}

fn property_suites() -> Check {
    let started = Instant::now();
    let registry = OperatorTypeRegistry::default();

    // (a) reachability against the transitive closure.
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for i in 0..1000 {
        let c = random_slo_case(&mut rng, 10);
        let got = check_reachability(&c.dag);
        let want = reachability_oracle(&c.dag);
        let agree = want.pairs.iter().all(|((a, t), ok)| got.reachable(a, t) == Some(*ok))
            && got.unreachable_terminals.iter().cloned().collect::<BTreeSet<_>>() == want.unreachable
            && got.dead_end_ingests.iter().cloned().collect::<BTreeSet<_>>() == want.dead_ends;
        ensure(agree, format!("(a) reachability case {i}"))?;
    }

    // (b) SLO rules against explicit path enumeration.
    for i in 0..1000 {
        let c = random_slo_case(&mut rng, 10);
        let got: BTreeSet<(String, String)> = validate_dag(&c.dag, &c.intent(), &registry)
            .violations
            .iter()
            .filter(|v| v.code.as_str().starts_with("PATTERN_SLO_"))
            .map(|v| (v.code.as_str().to_string(), v.subject.clone()))
            .collect();
        ensure(got == slo_oracle(&c), format!("(b) slo case {i}"))?;
    }

    // (c) planner survivors against exhaustive enumeration.
    for i in 0..300 {
        let c = random_plan_case(&mut rng);
        let report = select_products_detailed(&c.dag, &c.catalog(), &c.intent(), &registry)
            .map_err(|e| format!("(c) case {i}: {e}"))?;
        let got: BTreeSet<_> = report.survivors.into_iter().collect();
        ensure(got == planner_oracle(&c), format!("(c) planner case {i}"))?;
    }

    // (d) no returned plan binds a hard anti-pattern match.
    let mut exercised = 0;
    while exercised < 500 {
        let c = random_plan_case(&mut rng);
        let tripped = c
            .dag
            .nodes
            .iter()
            .any(|n| c.skills.iter().any(|s| s.types.contains(&n.op_type.as_str()) && hard_match(n, s, c.rate)));
        if !tripped {
            continue;
        }
        exercised += 1;
        let (intent, catalog) = (c.intent(), c.catalog());
        let report = select_products_detailed(&c.dag, &catalog, &intent, &registry).map_err(|e| e.to_string())?;
        for plan in &report.plans {
            let bad = audit_plan(plan, &catalog, &intent, &registry).iter().any(|e| e.code == "HARD_ANTI_PATTERN");
            ensure(!bad, "(d) plan binds a hard anti-pattern")?;
        }
    }

    // (e) the pipeline is deterministic.
    let runs: Vec<_> = (0..3)
        .map(|_| {
            let p = pipeline(&trading_intent(), &catalog("skills"));
            (p.plan.to_yaml(), p.artifacts.files())
        })
        .collect();
    ensure(runs[0] == runs[1] && runs[1] == runs[2], "(e) pipeline output differs between runs")?;

    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("a-e in {:.1} s", elapsed.as_secs_f64()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("trading cycle end to end", trading_cycle),
        ("latency violation rejects the DAG", latency_rejection),
        ("injected faults attributed 20/20", injection_accuracy),
        ("degraded catalog converges", learning_loop),
        ("operational knowledge ablation", ablation),
        ("operator set extension", chat_extension),
        ("property suites", property_suites),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
