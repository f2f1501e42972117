mod oracles;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dds_core::operator::{check_reachability, validate_dag, OperatorTypeRegistry, ViolationCode};
use oracles::*;

const CASES: usize = 1200;

#[test]
fn reachability_matches_transitive_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..CASES {
        let c = random_slo_case(&mut rng, 10);
        let got = check_reachability(&c.dag);
        let want = reachability_oracle(&c.dag);
        for ((i, t), ok) in &want.pairs {
            assert_eq!(got.reachable(i, t), Some(*ok), "case {case}: {i} -> {t}\n{}", c.dag.to_yaml());
        }
        assert_eq!(got.pairs.len(), want.pairs.len(), "case {case}");
        let unreachable: BTreeSet<String> = got.unreachable_terminals.iter().cloned().collect();
        let dead: BTreeSet<String> = got.dead_end_ingests.iter().cloned().collect();
        assert_eq!(unreachable, want.unreachable, "case {case}");
        assert_eq!(dead, want.dead_ends, "case {case}");
    }
}

#[test]
fn slo_violations_match_path_enumeration() {
    let registry = OperatorTypeRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut fired = BTreeSet::new();
    for case in 0..CASES {
        let c = random_slo_case(&mut rng, 10);
        let verdict = validate_dag(&c.dag, &c.intent(), &registry);
        let got: BTreeSet<(String, String)> = verdict
            .violations
            .iter()
            .filter(|v| {
                matches!(
                    v.code,
                    ViolationCode::PatternSloLatency
                        | ViolationCode::PatternSloThroughput
                        | ViolationCode::PatternSloConsistency
                )
            })
            .map(|v| (v.code.as_str().to_string(), v.subject.clone()))
            .collect();
        let want = slo_oracle(&c);
        assert_eq!(got, want, "case {case}\n{}", c.dag.to_yaml());
        fired.extend(want.into_iter().map(|(code, _)| code));
    }
    // The generator must actually exercise every rule.
    assert_eq!(fired.len(), 3, "{fired:?}");
}

#[test]
fn latency_budget_is_judged_on_the_best_path() {
    // Two routes into one store: 50 ms direct and 900 ms via a queue.
    let doc = r#"
dag:
  nodes:
    - {id: src, op_type: INGEST}
    - {id: q, op_type: QUEUE}
    - {id: db, op_type: STORE, serves: [point_lookup]}
  edges:
    - {from: src, to: db, latency_contribution_ms: 50, throughput_capacity_eps: 1000, consistency: strong, delivery: at_least_once}
    - {from: src, to: q, latency_contribution_ms: 400, throughput_capacity_eps: 1000, consistency: strong, delivery: at_least_once}
    - {from: q, to: db, latency_contribution_ms: 500, throughput_capacity_eps: 1000, consistency: strong, delivery: at_least_once}
"#;
    let dag = dds_core::operator::OperatorDag::from_yaml(doc).unwrap();
    let registry = OperatorTypeRegistry::default();
    let mut intent = trading_intent();
    intent.latency.as_mut().unwrap().insert("point_lookup_p99_ms".into(), 60.0);
    let verdict = validate_dag(&dag, &intent, &registry);
    assert!(!verdict.has(ViolationCode::PatternSloLatency));
    intent.latency.as_mut().unwrap().insert("point_lookup_p99_ms".into(), 40.0);
    let verdict = validate_dag(&dag, &intent, &registry);
    assert!(verdict.has(ViolationCode::PatternSloLatency));
}
