mod oracles;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dds_core::operator::{validate_dag, OperatorTypeRegistry};
use dds_core::planner::{audit_plan, select_products_detailed, PhysicalPlan};
use oracles::*;

fn assignment(plan: &PhysicalPlan) -> BTreeMap<String, String> {
    plan.bindings.iter().map(|(n, b)| (n.clone(), b.system.clone())).collect()
}

#[test]
fn survivors_equal_exhaustive_enumeration() {
    let registry = OperatorTypeRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nonempty = 0;
    for case in 0..600 {
        let c = random_plan_case(&mut rng);
        let intent = c.intent();
        let dag_ok = validate_dag(&c.dag, &intent, &registry);
        assert!(dag_ok.accepted(), "case {case}: {:?}", dag_ok.codes());

        let report = select_products_detailed(&c.dag, &c.catalog(), &intent, &registry).unwrap();
        let got: BTreeSet<_> = report.survivors.iter().cloned().collect();
        let want = planner_oracle(&c);
        assert_eq!(got, want, "case {case}\n{}", c.dag.to_yaml());
        assert_eq!(report.survivors.len(), got.len(), "case {case}: duplicate survivors");

        for plan in &report.plans {
            assert!(want.contains(&assignment(plan)), "case {case}: plan outside survivors");
        }
        assert_eq!(report.plans.len(), want.len().min(10), "case {case}");
        if let (Some(first), Some((systems, cost))) = (report.plans.first(), best_key(&c, &want)) {
            nonempty += 1;
            assert_eq!(first.plan_rank_key.simplicity, systems, "case {case}");
            assert_eq!(first.plan_rank_key.monthly_usd, cost as f64, "case {case}");
            for w in report.plans.windows(2) {
                assert!(w[0].plan_rank_key.compare(&w[1].plan_rank_key).is_le(), "case {case}");
            }
        }
    }
    // Both feasible and infeasible cases must be well represented.
    assert!(nonempty > 100 && nonempty < 550, "{nonempty} feasible cases");
}

#[test]
fn no_plan_binds_a_hard_anti_pattern() {
    let registry = OperatorTypeRegistry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exercised = 0;
    let mut attempts = 0;
    while exercised < 500 {
        attempts += 1;
        assert!(attempts < 20_000, "generator rarely produces hard matches");
        let c = random_plan_case(&mut rng);
        let tripped = c.dag.nodes.iter().any(|n| {
            c.skills
                .iter()
                .any(|s| s.types.contains(&n.op_type.as_str()) && hard_match(n, s, c.rate))
        });
        if !tripped {
            continue;
        }
        exercised += 1;
        let intent = c.intent();
        let catalog = c.catalog();
        let report = select_products_detailed(&c.dag, &catalog, &intent, &registry).unwrap();
        for plan in &report.plans {
            for node in &plan.dag.nodes {
                let system = plan.system_of(&node.id).unwrap();
                if let Some(s) = c.skills.iter().find(|s| s.name == system) {
                    assert!(!hard_match(node, s, c.rate), "{} bound to {system}", node.id);
                }
            }
            let audit = audit_plan(plan, &catalog, &intent, &registry);
            assert!(audit.iter().all(|e| e.code != "HARD_ANTI_PATTERN"), "{audit:?}");
        }
    }
}
