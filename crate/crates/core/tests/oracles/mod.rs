//! Fixture loaders, random generators, and brute-force oracles shared by
//! the property suites and the acceptance target. Oracles here never call
//! the code under test; they recompute from first principles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use dds_core::attribution::{run_cycle, Approvals, AttributionLog, Classifier, CycleInputs, CycleResult};
use dds_core::clock::FixedClock;
use dds_core::harness::{FaultInjection, HostProfile, ImageRegistry, SimulatedRunner};
use dds_core::intent::{parse_intent, validate_intent, IntentSpec};
use dds_core::operator::{
    Delivery, Edge, EdgeGuarantee, GuaranteeTable, OperatorDag, OperatorNode, OperatorTypeRegistry,
};
use dds_core::planner::{select_products, synthesize_dag, PhysicalPlan, SynthesisRules};
use dds_core::render::{build_brief, render, ArtifactSet};
use dds_core::skill::{load_catalog, Skill, SkillCatalog};

pub fn fixtures() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("fixtures");
    if own.join("trading_intent.yaml").exists() {
        own
    } else {
        here.join("../core/fixtures")
    }
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn trading_intent() -> IntentSpec {
    parse_intent(&read_fixture("trading_intent.yaml")).expect("trading intent parses")
}

pub fn defaulted(intent: &IntentSpec) -> IntentSpec {
    let out = validate_intent(intent);
    assert!(out.report.valid(), "{:?}", out.report.hard_errors);
    out.defaulted
}

pub fn catalog(dir: &str) -> SkillCatalog {
    load_catalog(&fixtures().join(dir), &OperatorTypeRegistry::default()).expect("catalog loads")
}

pub fn profile(name: &str) -> HostProfile {
    HostProfile::from_yaml(&read_fixture(&format!("profiles/{name}.yaml"))).expect("profile parses")
}

/// Defaulted intent, first synthesized DAG, best plan, and its artifacts.
pub struct Pipeline {
    pub intent: IntentSpec,
    pub dag: OperatorDag,
    pub plan: PhysicalPlan,
    pub artifacts: ArtifactSet,
}

pub fn pipeline(intent: &IntentSpec, catalog: &SkillCatalog) -> Pipeline {
    let registry = OperatorTypeRegistry::default();
    let intent = defaulted(intent);
    let dag = synthesize_dag(&intent, &registry, &SynthesisRules::default(), &GuaranteeTable::default())
        .expect("synthesis succeeds")
        .remove(0);
    let plan = select_products(&dag, catalog, &intent, &registry)
        .expect("selection succeeds")
        .remove(0);
    let artifacts = render(&build_brief(&plan, &intent), &plan, catalog, &intent).expect("render succeeds");
    Pipeline {
        intent,
        dag,
        plan,
        artifacts,
    }
}

pub struct Loop {
    pub catalog: SkillCatalog,
    pub profile: HostProfile,
    pub log: AttributionLog,
}

impl Loop {
    pub fn new(catalog: SkillCatalog, profile: HostProfile) -> Self {
        Self {
            catalog,
            profile,
            log: AttributionLog::default(),
        }
    }

    /// One cycle on the simulated runner; state carries forward.
    pub fn cycle(&mut self, n: u32, intent: &IntentSpec, faults: Vec<FaultInjection>, approvals: &Approvals) -> CycleResult {
        let mut runner = SimulatedRunner::new(faults);
        let result = run_cycle(CycleInputs {
            cycle: n,
            intent,
            catalog: self.catalog.clone(),
            profile: self.profile.clone(),
            runner: &mut runner,
            approvals,
            clock: &FixedClock::epoch(),
            registry: &OperatorTypeRegistry::default(),
            images: &ImageRegistry::default(),
            classifier: &Classifier::default(),
            prior_log: &self.log,
        })
        .expect("cycle completes");
        self.log.extend(result.events.clone());
        self.catalog = result.catalog.clone();
        self.profile = result.profile.clone();
        result
    }
}

// ---------------------------------------------------------------------------
// Random DAGs for reachability and SLO checks.

pub const READ_TAGS: [&str; 3] = ["point_lookup", "olap_range_scan", "streaming"];
const BUDGET_NAMES: [(&str, &str); 3] = [
    ("point_lookup_p99_ms", "point_lookup"),
    ("analytical_query_p99_ms", "olap_range_scan"),
    ("streaming_p99_ms", "streaming"),
];
const LEVELS: [&str; 2] = ["eventual", "strong"];

fn level_rank(l: &str) -> usize {
    LEVELS.iter().position(|x| *x == l).expect("known level")
}

#[derive(Debug, Clone)]
pub struct SloCase {
    pub dag: OperatorDag,
    pub rate: i64,
    /// Budget name -> ms.
    pub budgets: BTreeMap<String, i64>,
}

impl SloCase {
    pub fn intent(&self) -> IntentSpec {
        let latency: String = self
            .budgets
            .iter()
            .map(|(k, v)| format!("    {k}: {v}\n"))
            .collect();
        let doc = format!(
            "intent:\n  data_model:\n    entities: [item]\n    primary_types: [event]\n  access_pattern:\n    read: [point_lookup]\n    write: [high_throughput_append]\n  scale:\n    ingest_rate_events_per_sec: {}\n    retention_history_years: 1\n    concurrent_users: 1\n  latency:\n{latency}  consistency:\n    item: eventual\n  cost:\n    monthly_usd_budget: 1000\n    preference: simplicity\n",
            self.rate
        );
        parse_intent(&doc).expect("generated intent parses")
    }
}

pub fn random_slo_case(rng: &mut impl Rng, max_nodes: usize) -> SloCase {
    let types = ["INGEST", "QUEUE", "TRANSFORM", "STORE", "CACHE", "SERVE"];
    let n = rng.gen_range(2..=max_nodes);
    let mut nodes = Vec::new();
    for i in 0..n {
        let t = if i == 0 { "INGEST" } else { *types.choose(rng).unwrap() };
        let mut node = OperatorNode::new(&format!("n{i}"), t, "");
        if matches!(t, "STORE" | "CACHE" | "SERVE") && rng.gen_bool(0.7) {
            let k = rng.gen_range(1..=2);
            node.serves = READ_TAGS.choose_multiple(rng, k).map(|s| s.to_string()).collect();
            node.serves.sort();
        }
        if node.is_serving() && rng.gen_bool(0.5) {
            node.required_consistency = Some((*LEVELS.choose(rng).unwrap()).into());
        }
        nodes.push(node);
    }
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let m = rng.gen_range(1..=n * 2);
    for _ in 0..m {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        // Mostly forward edges; a few backward ones make cycles.
        if a == b || (a > b && !rng.gen_bool(0.1)) || !seen.insert((a, b)) {
            continue;
        }
        let (from, to) = (format!("n{a}"), format!("n{b}"));
        if rng.gen_bool(0.05) {
            edges.push(Edge::bare(&from, &to));
        } else {
            edges.push(Edge::with(
                &from,
                &to,
                EdgeGuarantee {
                    latency_contribution_ms: rng.gen_range(0..400) as f64,
                    throughput_capacity_eps: rng.gen_range(1..20_000) as f64,
                    consistency: (*LEVELS.choose(rng).unwrap()).into(),
                    delivery: Delivery::AtLeastOnce,
                },
            ));
        }
    }
    let mut budgets = BTreeMap::new();
    for (name, _) in BUDGET_NAMES {
        if rng.gen_bool(0.6) {
            budgets.insert(name.to_string(), rng.gen_range(50..1500));
        }
    }
    budgets.entry("point_lookup_p99_ms".into()).or_insert(1000);
    SloCase {
        dag: OperatorDag { nodes, edges },
        rate: rng.gen_range(1..15_000),
        budgets,
    }
}

fn is_serving(n: &OperatorNode) -> bool {
    !n.serves.is_empty() || n.op_type.as_str() == "SERVE"
}

/// Transitive closure by Warshall's algorithm over node indices.
pub fn closure(dag: &OperatorDag) -> Vec<Vec<bool>> {
    let n = dag.nodes.len();
    let idx = |id: &str| dag.nodes.iter().position(|x| x.id == id);
    let mut r = vec![vec![false; n]; n];
    for e in &dag.edges {
        if let (Some(a), Some(b)) = (idx(&e.from), idx(&e.to)) {
            r[a][b] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

#[derive(Debug, PartialEq, Eq)]
pub struct ReachOracle {
    pub pairs: BTreeMap<(String, String), bool>,
    pub unreachable: BTreeSet<String>,
    pub dead_ends: BTreeSet<String>,
}

pub fn reachability_oracle(dag: &OperatorDag) -> ReachOracle {
    let r = closure(dag);
    let mut pairs = BTreeMap::new();
    let mut unreachable = BTreeSet::new();
    let mut dead_ends = BTreeSet::new();
    let ingests: Vec<usize> = (0..dag.nodes.len()).filter(|&i| dag.nodes[i].op_type.as_str() == "INGEST").collect();
    let terms: Vec<usize> = (0..dag.nodes.len()).filter(|&i| is_serving(&dag.nodes[i])).collect();
    for &i in &ingests {
        let mut any = false;
        for &t in &terms {
            let ok = i != t && r[i][t];
            any |= ok;
            pairs.insert((dag.nodes[i].id.clone(), dag.nodes[t].id.clone()), ok);
        }
        if !any {
            dead_ends.insert(dag.nodes[i].id.clone());
        }
    }
    for &t in &terms {
        if !ingests.iter().any(|&i| i != t && r[i][t]) {
            unreachable.insert(dag.nodes[t].id.clone());
        }
    }
    ReachOracle {
        pairs,
        unreachable,
        dead_ends,
    }
}

/// Every simple path as edge indices, by plain recursion.
pub fn simple_paths(dag: &OperatorDag, from: &str, to: &str, usable: &dyn Fn(&Edge) -> bool) -> Vec<Vec<usize>> {
    fn go(
        dag: &OperatorDag,
        at: &str,
        to: &str,
        usable: &dyn Fn(&Edge) -> bool,
        visited: &mut Vec<String>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        for (i, e) in dag.edges.iter().enumerate() {
            if e.from != at || !usable(e) || visited.contains(&e.to) {
                continue;
            }
            path.push(i);
            if e.to == to {
                out.push(path.clone());
            } else {
                visited.push(e.to.clone());
                go(dag, &e.to, to, usable, visited, path, out);
                visited.pop();
            }
            path.pop();
        }
    }
    let mut out = Vec::new();
    if from != to {
        go(dag, from, to, usable, &mut vec![from.to_string()], &mut Vec::new(), &mut out);
    }
    out
}

/// `(code, terminal)` pairs the SLO rules must report.
pub fn slo_oracle(case: &SloCase) -> BTreeSet<(String, String)> {
    let dag = &case.dag;
    let usable = |e: &Edge| {
        e.from != e.to
            && e.latency_contribution_ms.is_some_and(|l| l >= 0.0)
            && e.throughput_capacity_eps.is_some_and(|t| t > 0.0)
            && e.consistency.is_some()
            && e.delivery.is_some()
    };
    let mut out = BTreeSet::new();
    let mut done = BTreeSet::new();
    for term in dag.nodes.iter().filter(|n| is_serving(n)) {
        if !done.insert(term.id.clone()) {
            continue;
        }
        let mut lat = Vec::new();
        let mut cap = Vec::new();
        let mut cons = Vec::new();
        for ing in dag.nodes.iter().filter(|n| n.op_type.as_str() == "INGEST") {
            for p in simple_paths(dag, &ing.id, &term.id, &usable) {
                let es: Vec<&Edge> = p.iter().map(|&i| &dag.edges[i]).collect();
                lat.push(es.iter().map(|e| e.latency_contribution_ms.unwrap()).sum::<f64>());
                cap.push(es.iter().map(|e| e.throughput_capacity_eps.unwrap()).fold(f64::MAX, f64::min));
                cons.push(es.iter().map(|e| level_rank(e.consistency.as_ref().unwrap().as_str())).min().unwrap());
            }
        }
        if lat.is_empty() {
            continue;
        }
        let best = lat.iter().cloned().fold(f64::MAX, f64::min);
        for (name, tag) in BUDGET_NAMES {
            if let Some(b) = case.budgets.get(name) {
                if term.serves.iter().any(|s| s == tag) && best > *b as f64 {
                    out.insert(("PATTERN_SLO_LATENCY".into(), term.id.clone()));
                }
            }
        }
        if cap.iter().cloned().fold(f64::MAX, f64::min) < case.rate as f64 {
            out.insert(("PATTERN_SLO_THROUGHPUT".into(), term.id.clone()));
        }
        if let Some(req) = &term.required_consistency {
            if cons.iter().any(|&c| c < level_rank(req.as_str())) {
                out.insert(("PATTERN_SLO_CONSISTENCY".into(), term.id.clone()));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Synthetic catalogs and DAGs for the planner.

const SYNTH_TYPES: [&str; 5] = ["QUEUE", "TRANSFORM", "STORE", "CACHE", "SERVE"];
const SYNTH_MODELS: [&str; 3] = ["event", "relational", "key_value"];
const SYNTH_PATTERNS: [&str; 3] = ["point_lookup", "streaming", "high_throughput_append"];

/// Allowed `(from, to)` type pairs, written out by hand.
const ALLOWED: [(&str, &str); 22] = [
    ("INGEST", "QUEUE"),
    ("INGEST", "TRANSFORM"),
    ("INGEST", "STORE"),
    ("INGEST", "CACHE"),
    ("QUEUE", "TRANSFORM"),
    ("QUEUE", "STORE"),
    ("QUEUE", "CACHE"),
    ("QUEUE", "SERVE"),
    ("TRANSFORM", "STORE"),
    ("TRANSFORM", "CACHE"),
    ("TRANSFORM", "QUEUE"),
    ("TRANSFORM", "SERVE"),
    ("STORE", "TRANSFORM"),
    ("STORE", "CACHE"),
    ("STORE", "SERVE"),
    ("CACHE", "SERVE"),
    ("QUEUE", "QUEUE"),
    ("TRANSFORM", "TRANSFORM"),
    ("STORE", "STORE"),
    ("CACHE", "CACHE"),
    ("SERVE", "SERVE"),
    ("INGEST", "INGEST"),
];

fn allowed(a: &str, b: &str) -> bool {
    // Same-type pairs are listed only to keep the table total; the registry
    // does not allow them.
    a != b && ALLOWED.contains(&(a, b))
}

#[derive(Debug, Clone)]
pub struct SynthComposition {
    pub with: usize,
    pub direction: &'static str,
}

#[derive(Debug, Clone)]
pub enum SynthMatcher {
    Pairing { op_type: Option<&'static str>, pattern: &'static str },
    VersionFrom(u32),
    RateAbove(i64),
}

#[derive(Debug, Clone)]
pub struct SynthSkill {
    pub name: String,
    pub version: u32,
    pub types: Vec<&'static str>,
    pub models: Vec<&'static str>,
    pub patterns: Vec<&'static str>,
    pub levels: Vec<&'static str>,
    pub cost: i64,
    pub compositions: Vec<SynthComposition>,
    /// Each inner list is one anti-pattern's matchers; `true` marks hard.
    pub anti_patterns: Vec<(bool, Vec<SynthMatcher>)>,
}

impl SynthSkill {
    pub fn to_json(&self, all: &[SynthSkill]) -> Value {
        let matcher = |m: &SynthMatcher| match m {
            SynthMatcher::Pairing { op_type, pattern } => match op_type {
                Some(t) => json!({"kind": "operator_pairing", "op_type": t, "access_pattern": pattern}),
                None => json!({"kind": "operator_pairing", "access_pattern": pattern}),
            },
            SynthMatcher::VersionFrom(v) => json!({"kind": "version_range", "from": v.to_string()}),
            SynthMatcher::RateAbove(r) => json!({
                "kind": "config_predicate",
                "path": "intent.scale.ingest_rate_events_per_sec",
                "op": "gt",
                "value": r,
            }),
        };
        json!({
            "system": self.name,
            "version": self.version.to_string(),
            "operator_types": self.types,
            "capabilities": {
                "data_models": self.models,
                "access_patterns": self.patterns,
                "consistency": self.levels,
                "monthly_usd_estimate": self.cost,
            },
            "compositions": self.compositions.iter().map(|c| json!({
                "with": all[c.with].name,
                "connector": format!("{}_to_{}", self.name, all[c.with].name),
                "direction": c.direction,
                "semantics": "at_least_once",
            })).collect::<Vec<_>>(),
            "anti_patterns": self.anti_patterns.iter().enumerate().map(|(i, (hard, ms))| json!({
                "scenario": format!("case {i}"),
                "reason": "generated",
                "alternative": "another system",
                "severity": if *hard { "hard_limit" } else { "soft" },
                "matchers": ms.iter().map(matcher).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "operational": {
                "recommended_images": [format!("{}:{}", self.name, self.version)],
            },
        })
    }
}

pub fn random_synth_skills(rng: &mut impl Rng, max: usize) -> Vec<SynthSkill> {
    let n = rng.gen_range(1..=max);
    let mut skills: Vec<SynthSkill> = (0..n)
        .map(|i| {
            let pick = |rng: &mut _, from: &[&'static str], min: usize| -> Vec<&'static str> {
                let k = rand::Rng::gen_range(rng, min..=from.len());
                let mut v: Vec<&'static str> = from.choose_multiple(rng, k).copied().collect();
                v.sort();
                v
            };
            let anti_patterns = (0..rng.gen_range(0..=2))
                .map(|_| {
                    let m = match rng.gen_range(0..4) {
                        0 => SynthMatcher::Pairing {
                            op_type: Some(*SYNTH_TYPES.choose(rng).unwrap()),
                            pattern: *SYNTH_PATTERNS.choose(rng).unwrap(),
                        },
                        1 => SynthMatcher::Pairing {
                            op_type: None,
                            pattern: *SYNTH_PATTERNS.choose(rng).unwrap(),
                        },
                        2 => SynthMatcher::VersionFrom(rng.gen_range(1..=4)),
                        _ => SynthMatcher::RateAbove(rng.gen_range(0..200)),
                    };
                    (rng.gen_bool(0.7), vec![m])
                })
                .collect();
            SynthSkill {
                name: format!("sys{i}"),
                version: rng.gen_range(1..=3),
                types: pick(rng, &SYNTH_TYPES, 1),
                models: pick(rng, &SYNTH_MODELS, 1),
                patterns: pick(rng, &SYNTH_PATTERNS, 1),
                levels: pick(rng, &LEVELS, 1),
                cost: rng.gen_range(1..=50),
                compositions: Vec::new(),
                anti_patterns,
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.5) {
                let direction = *["inbound", "outbound", "bidirectional"].choose(rng).unwrap();
                skills[i].compositions.push(SynthComposition { with: j, direction });
            }
        }
    }
    skills
}

pub fn synth_catalog(skills: &[SynthSkill]) -> SkillCatalog {
    SkillCatalog::from_skills(skills.iter().map(|s| {
        serde_json::from_value::<Skill>(s.to_json(skills)).expect("synthetic skill deserializes")
    }))
}

#[derive(Debug, Clone)]
pub struct PlanCase {
    pub skills: Vec<SynthSkill>,
    pub dag: OperatorDag,
    pub rate: i64,
    pub budget: i64,
}

impl PlanCase {
    pub fn intent(&self) -> IntentSpec {
        let doc = format!(
            "intent:\n  data_model:\n    entities: [item]\n    primary_types: [event]\n  access_pattern:\n    read: [point_lookup]\n    write: [high_throughput_append]\n  scale:\n    ingest_rate_events_per_sec: {}\n    retention_history_years: 1\n    concurrent_users: 1\n  latency:\n    point_lookup_p99_ms: 100000\n  consistency:\n    item: eventual\n  cost:\n    monthly_usd_budget: {}\n    preference: simplicity\n",
            self.rate, self.budget
        );
        defaulted(&parse_intent(&doc).expect("generated intent parses"))
    }

    pub fn catalog(&self) -> SkillCatalog {
        synth_catalog(&self.skills)
    }
}

/// A DAG of at most `max_nodes` nodes rooted at one INGEST, built only from
/// allowed pairings, with at least one node serving `point_lookup`.
pub fn random_plan_dag(rng: &mut impl Rng, max_nodes: usize) -> OperatorDag {
    let n = rng.gen_range(2..=max_nodes);
    let mut nodes = vec![OperatorNode::new("n0", "INGEST", "")];
    let mut edges = Vec::new();
    let g = |rng: &mut _| EdgeGuarantee {
        latency_contribution_ms: rand::Rng::gen_range(rng, 1..10) as f64,
        throughput_capacity_eps: 1_000_000.0,
        consistency: "strong".into(),
        delivery: Delivery::AtLeastOnce,
    };
    for j in 1..n {
        let t = *SYNTH_TYPES.choose(rng).unwrap();
        let parents: Vec<usize> = (0..j).filter(|&i| allowed(nodes[i].op_type.as_str(), t)).collect();
        let (t, parent) = match parents.choose(rng) {
            Some(&p) => (t, p),
            None => ("STORE", 0),
        };
        let mut node = OperatorNode::new(&format!("n{j}"), t, "");
        if matches!(t, "STORE" | "CACHE" | "SERVE") && rng.gen_bool(0.6) {
            node.serves = vec![(*["point_lookup", "streaming"].choose(rng).unwrap()).to_string()];
        }
        if rng.gen_bool(0.3) {
            node.writes = vec!["high_throughput_append".into()];
        }
        if rng.gen_bool(0.4) {
            node.data_models = vec![(*SYNTH_MODELS.choose(rng).unwrap()).to_string()];
        }
        if is_serving(&node) && rng.gen_bool(0.4) {
            node.required_consistency = Some((*LEVELS.choose(rng).unwrap()).into());
        }
        edges.push(Edge::with(&format!("n{parent}"), &node.id, g(rng)));
        nodes.push(node);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let (ta, tb) = (nodes[a].op_type.as_str().to_string(), nodes[b].op_type.as_str().to_string());
        let key = (format!("n{a}"), format!("n{b}"));
        if a < b && allowed(&ta, &tb) && !edges.iter().any(|e: &Edge| (e.from.clone(), e.to.clone()) == key) {
            edges.push(Edge::with(&key.0, &key.1, g(rng)));
        }
    }
    if !nodes.iter().any(|x| x.serves.iter().any(|s| s == "point_lookup")) {
        let pos = nodes.iter().position(|x| matches!(x.op_type.as_str(), "STORE" | "CACHE" | "SERVE"));
        match pos {
            Some(p) => nodes[p].serves.push("point_lookup".into()),
            None => {
                let mut s = OperatorNode::new(&format!("n{}", nodes.len()), "STORE", "");
                s.serves = vec!["point_lookup".into()];
                edges.push(Edge::with("n0", &s.id, g(rng)));
                nodes.push(s);
            }
        }
    }
    OperatorDag { nodes, edges }
}

fn fires(m: &SynthMatcher, skill: &SynthSkill, node: &OperatorNode, rate: i64) -> bool {
    match m {
        SynthMatcher::Pairing { op_type, pattern } => {
            op_type.map_or(true, |t| t == node.op_type.as_str())
                && node.serves.iter().chain(&node.writes).any(|p| p == pattern)
        }
        SynthMatcher::VersionFrom(v) => skill.version >= *v,
        SynthMatcher::RateAbove(r) => rate > *r,
    }
}

/// Gate 1 and gate 2 for one (node, skill) pair; `None` when the skill
/// cannot fill the node's type at all.
pub fn admissible(node: &OperatorNode, s: &SynthSkill, rate: i64) -> Option<bool> {
    if !s.types.contains(&node.op_type.as_str()) {
        return None;
    }
    let models = node.data_models.iter().all(|m| s.models.contains(&m.as_str()));
    let patterns = node.serves.iter().chain(&node.writes).all(|p| s.patterns.contains(&p.as_str()));
    let consistency = node
        .required_consistency
        .as_ref()
        .map_or(true, |r| s.levels.iter().any(|l| level_rank(l) >= level_rank(r.as_str())));
    let hard = hard_match(node, s, rate);
    Some(models && patterns && consistency && !hard)
}

pub fn hard_match(node: &OperatorNode, s: &SynthSkill, rate: i64) -> bool {
    s.anti_patterns
        .iter()
        .any(|(hard, ms)| *hard && ms.iter().any(|m| fires(m, s, node, rate)))
}

fn connected(skills: &[SynthSkill], a: usize, b: usize) -> bool {
    let declares = |x: usize, y: usize, dirs: &[&str]| {
        skills[x]
            .compositions
            .iter()
            .any(|c| c.with == y && dirs.contains(&c.direction))
    };
    declares(b, a, &["inbound", "bidirectional"]) || declares(a, b, &["outbound", "bidirectional"])
}

/// Every surviving assignment, by enumerating the full product of systems.
pub fn planner_oracle(case: &PlanCase) -> BTreeSet<BTreeMap<String, String>> {
    let dag = &case.dag;
    let choices: Vec<Vec<Option<usize>>> = dag
        .nodes
        .iter()
        .map(|n| {
            if n.op_type.as_str() == "INGEST" {
                vec![None]
            } else {
                (0..case.skills.len())
                    .filter(|&i| admissible(n, &case.skills[i], case.rate) == Some(true))
                    .map(Some)
                    .collect()
            }
        })
        .collect();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; choices.len()];
    if choices.iter().any(Vec::is_empty) {
        return out;
    }
    loop {
        let pick: Vec<Option<usize>> = idx.iter().enumerate().map(|(p, &i)| choices[p][i]).collect();
        let pos = |id: &str| dag.nodes.iter().position(|n| n.id == id).unwrap();
        let edges_ok = dag.edges.iter().all(|e| match (pick[pos(&e.from)], pick[pos(&e.to)]) {
            (Some(a), Some(b)) => a == b || connected(&case.skills, a, b),
            _ => true,
        });
        let systems: BTreeSet<usize> = pick.iter().flatten().copied().collect();
        let cost: i64 = systems.iter().map(|&s| case.skills[s].cost).sum();
        if edges_ok && cost <= case.budget {
            out.insert(
                dag.nodes
                    .iter()
                    .zip(&pick)
                    .map(|(n, p)| {
                        let sys = p.map_or("producer".to_string(), |i| case.skills[i].name.clone());
                        (n.id.clone(), sys)
                    })
                    .collect(),
            );
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Smallest `(distinct systems, monthly cost)` among survivors.
pub fn best_key(case: &PlanCase, survivors: &BTreeSet<BTreeMap<String, String>>) -> Option<(usize, i64)> {
    survivors
        .iter()
        .map(|a| {
            let systems: BTreeSet<&String> = a.values().filter(|s| *s != "producer").collect();
            let cost = systems
                .iter()
                .map(|s| case.skills.iter().find(|k| &&k.name == s).unwrap().cost)
                .sum();
            (systems.len(), cost)
        })
        .min()
}

pub fn random_plan_case(rng: &mut impl Rng) -> PlanCase {
    let skills = random_synth_skills(rng, 5);
    let dag = random_plan_dag(rng, 6);
    PlanCase {
        skills,
        dag,
        rate: rng.gen_range(1..200),
        budget: rng.gen_range(20..200),
    }
}
