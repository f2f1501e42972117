use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dag::OperatorDag;
use super::registry::OperatorTypeRegistry;
use super::slo::{enumerate_paths, path_slo, PathSlo, MAX_PATHS_PER_TERMINAL};
use crate::intent::{latency_budget_for, IntentSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DuplicateNodeId,
    UnknownOperatorType,
    ServesOnNonTerminal,
    DanglingEdge,
    SelfLoop,
    DuplicateEdge,
    EdgeTypeMismatch,
    UnannotatedEdge,
    InvalidGuarantee,
    UnknownConsistencyLevel,
    Cycle,
    UnreachableTerminal,
    IngestReachesNoTerminal,
    UnservedAccessPattern,
    PathExplosion,
    PatternSloLatency,
    PatternSloThroughput,
    PatternSloConsistency,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            DuplicateNodeId => "DUPLICATE_NODE_ID",
            UnknownOperatorType => "UNKNOWN_OPERATOR_TYPE",
            ServesOnNonTerminal => "SERVES_ON_NON_TERMINAL",
            DanglingEdge => "DANGLING_EDGE",
            SelfLoop => "SELF_LOOP",
            DuplicateEdge => "DUPLICATE_EDGE",
            EdgeTypeMismatch => "EDGE_TYPE_MISMATCH",
            UnannotatedEdge => "UNANNOTATED_EDGE",
            InvalidGuarantee => "INVALID_GUARANTEE",
            UnknownConsistencyLevel => "UNKNOWN_CONSISTENCY_LEVEL",
            Cycle => "CYCLE",
            UnreachableTerminal => "UNREACHABLE_TERMINAL",
            IngestReachesNoTerminal => "INGEST_REACHES_NO_TERMINAL",
            UnservedAccessPattern => "UNSERVED_ACCESS_PATTERN",
            PathExplosion => "PATH_EXPLOSION",
            PatternSloLatency => "PATTERN_SLO_LATENCY",
            PatternSloThroughput => "PATTERN_SLO_THROUGHPUT",
            PatternSloConsistency => "PATTERN_SLO_CONSISTENCY",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Node id, edge key (`a->b`), or access pattern the violation is about.
    pub subject: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachabilityPair {
    pub ingest: String,
    pub terminal: String,
    pub reachable: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub pairs: Vec<ReachabilityPair>,
    pub unreachable_terminals: Vec<String>,
    pub dead_end_ingests: Vec<String>,
}

impl ReachabilityReport {
    pub fn pass(&self) -> bool {
        self.unreachable_terminals.is_empty() && self.dead_end_ingests.is_empty()
    }

    pub fn reachable(&self, ingest: &str, terminal: &str) -> Option<bool> {
        self.pairs
            .iter()
            .find(|p| p.ingest == ingest && p.terminal == terminal)
            .map(|p| p.reachable)
    }
}

/// Every serving terminal must be reachable from some INGEST, and every
/// INGEST must reach some serving terminal.
pub fn check_reachability(dag: &OperatorDag) -> ReachabilityReport {
    let terminals: Vec<&str> = dag.serving_nodes().map(|n| n.id.as_str()).collect();
    let mut report = ReachabilityReport::default();
    let mut reached: BTreeSet<&str> = BTreeSet::new();
    for ingest in dag.ingest_nodes() {
        let seen = dag.reachable_from(&ingest.id);
        let mut any = false;
        for &t in &terminals {
            let reachable = t != ingest.id && seen.contains(t);
            if reachable {
                reached.insert(t);
                any = true;
            }
            report.pairs.push(ReachabilityPair {
                ingest: ingest.id.clone(),
                terminal: t.to_string(),
                reachable,
            });
        }
        if !any {
            report.dead_end_ingests.push(ingest.id.clone());
        }
    }
    report.unreachable_terminals = terminals
        .iter()
        .filter(|t| !reached.contains(**t))
        .map(|t| t.to_string())
        .collect();
    report
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DagVerdict {
    pub violations: Vec<Violation>,
    pub reachability: ReachabilityReport,
    /// Aggregates for every INGEST-rooted path to a serving terminal.
    pub paths: Vec<PathSlo>,
}

impl DagVerdict {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            accepted: bool,
            #[serde(flatten)]
            verdict: &'a DagVerdict,
        }
        serde_yaml::to_string(&Doc {
            accepted: self.accepted(),
            verdict: self,
        })
        .expect("verdict serializes")
    }
}

fn v(code: ViolationCode, subject: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        code,
        subject: subject.into(),
        message: message.into(),
        path: Vec::new(),
    }
}

/// Type-checks, reachability-checks, and SLO-checks `dag` against `intent`.
/// Accept iff no violations.
pub fn validate_dag(
    dag: &OperatorDag,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> DagVerdict {
    use ViolationCode::*;
    let lattice = registry.lattice();
    let mut out = DagVerdict::default();
    let vs = &mut out.violations;

    let mut ids = BTreeSet::new();
    for n in &dag.nodes {
        if !ids.insert(n.id.as_str()) {
            vs.push(v(DuplicateNodeId, &n.id, format!("node id `{}` is declared twice", n.id)));
        }
        if !registry.contains(&n.op_type) {
            vs.push(v(
                UnknownOperatorType,
                &n.id,
                format!("node `{}` has unregistered type `{}`", n.id, n.op_type),
            ));
        } else if !n.serves.is_empty() && !registry.is_terminal(&n.op_type) {
            vs.push(v(
                ServesOnNonTerminal,
                &n.id,
                format!("`{}` is not terminal-capable but serves {:?}", n.op_type, n.serves),
            ));
        }
        if let Some(req) = &n.required_consistency {
            if !lattice.contains(req) {
                vs.push(v(
                    UnknownConsistencyLevel,
                    &n.id,
                    format!("node `{}` requires unknown level `{req}`", n.id),
                ));
            }
        }
    }

    let mut seen_edges = BTreeSet::new();
    for e in &dag.edges {
        let key = e.key();
        if !seen_edges.insert((e.from.as_str(), e.to.as_str())) {
            vs.push(v(DuplicateEdge, &key, format!("edge {key} is declared twice")));
        }
        if e.from == e.to {
            vs.push(v(SelfLoop, &key, format!("self-loop on `{}`", e.from)));
        }
        let (from, to) = (dag.node(&e.from), dag.node(&e.to));
        match (from, to) {
            (Some(a), Some(b)) => {
                let known = registry.contains(&a.op_type) && registry.contains(&b.op_type);
                if known && !registry.allows_edge(&a.op_type, &b.op_type) {
                    vs.push(v(
                        EdgeTypeMismatch,
                        &key,
                        format!("{} -> {} is not an allowed pairing", a.op_type, b.op_type),
                    ));
                }
            }
            _ => {
                let missing: Vec<&str> = [(&e.from, from), (&e.to, to)]
                    .into_iter()
                    .filter(|(_, n)| n.is_none())
                    .map(|(id, _)| id.as_str())
                    .collect();
                vs.push(v(
                    DanglingEdge,
                    &key,
                    format!("edge {key} references missing node(s) {missing:?}"),
                ));
            }
        }
        match e.guarantee() {
            None => vs.push(v(
                UnannotatedEdge,
                &key,
                format!("edge {key} lacks one or more guarantees"),
            )),
            Some(g) => {
                if !(g.latency_contribution_ms >= 0.0) || !(g.throughput_capacity_eps > 0.0) {
                    vs.push(v(
                        InvalidGuarantee,
                        &key,
                        format!(
                            "edge {key}: latency {} ms must be >= 0 and capacity {} eps > 0",
                            g.latency_contribution_ms, g.throughput_capacity_eps
                        ),
                    ));
                }
                if !lattice.contains(&g.consistency) {
                    vs.push(v(
                        UnknownConsistencyLevel,
                        &key,
                        format!("edge {key} uses unknown level `{}`", g.consistency),
                    ));
                }
            }
        }
    }

    let cyclic = dag.cyclic_nodes();
    if !cyclic.is_empty() {
        let mut c = v(Cycle, "dag", format!("nodes {cyclic:?} lie on a cycle"));
        c.path = cyclic.into_iter().collect();
        vs.push(c);
    }

    out.reachability = check_reachability(dag);
    for t in &out.reachability.unreachable_terminals {
        vs.push(v(
            UnreachableTerminal,
            t,
            format!("serving terminal `{t}` is not reachable from any INGEST"),
        ));
    }
    for i in &out.reachability.dead_end_ingests {
        vs.push(v(
            IngestReachesNoTerminal,
            i,
            format!("INGEST `{i}` reaches no serving terminal"),
        ));
    }

    let served: BTreeSet<&str> = dag
        .serving_nodes()
        .flat_map(|n| n.serves.iter().map(String::as_str))
        .collect();
    for pattern in intent.reads() {
        if !served.contains(pattern.as_str()) {
            vs.push(v(
                UnservedAccessPattern,
                pattern,
                format!("read pattern `{pattern}` is served by no node"),
            ));
        }
    }

    // SLO composition over annotated, well-formed edges.
    let usable = |i: usize| {
        let e = &dag.edges[i];
        e.guarantee()
            .map(|g| g.latency_contribution_ms >= 0.0 && g.throughput_capacity_eps > 0.0)
            .unwrap_or(false)
    };
    let rate = intent.ingest_rate() as f64;
    let ingests: Vec<&str> = dag.ingest_nodes().map(|n| n.id.as_str()).collect();
    let mut checked = BTreeSet::new();
    for term in dag.serving_nodes() {
        if !checked.insert(term.id.as_str()) {
            continue;
        }
        let mut slos = Vec::new();
        let mut exploded = false;
        for &ing in &ingests {
            let remaining = MAX_PATHS_PER_TERMINAL - slos.len().min(MAX_PATHS_PER_TERMINAL);
            match enumerate_paths(dag, ing, &term.id, remaining, usable) {
                Ok(ps) => slos.extend(ps.iter().filter_map(|p| path_slo(dag, lattice, p))),
                Err(_) => {
                    exploded = true;
                    break;
                }
            }
        }
        if exploded {
            vs.push(v(
                PathExplosion,
                &term.id,
                format!(
                    "more than {MAX_PATHS_PER_TERMINAL} simple paths reach `{}`",
                    term.id
                ),
            ));
            continue;
        }
        if slos.is_empty() {
            continue;
        }

        let best = slos
            .iter()
            .min_by(|a, b| a.total_latency_ms.total_cmp(&b.total_latency_ms))
            .expect("non-empty");
        let budgets: BTreeMap<String, f64> = term
            .serves
            .iter()
            .filter_map(|p| latency_budget_for(intent, p))
            .collect();
        for (name, budget) in &budgets {
            if best.total_latency_ms > *budget {
                let mut x = v(
                    PatternSloLatency,
                    &term.id,
                    format!(
                        "best path to `{}` takes {} ms, over budget {name} = {budget} ms",
                        term.id, best.total_latency_ms
                    ),
                );
                x.path = best.path.clone();
                vs.push(x);
            }
        }

        let worst_tp = slos
            .iter()
            .min_by(|a, b| a.min_throughput_eps.total_cmp(&b.min_throughput_eps))
            .expect("non-empty");
        if worst_tp.min_throughput_eps < rate {
            let mut x = v(
                PatternSloThroughput,
                &term.id,
                format!(
                    "path to `{}` carries {} eps, below ingest rate {rate} eps",
                    term.id, worst_tp.min_throughput_eps
                ),
            );
            x.path = worst_tp.path.clone();
            vs.push(x);
        }

        if let Some(req) = &term.required_consistency {
            let weak = slos
                .iter()
                .filter(|s| !lattice.at_least(&s.effective_consistency, req))
                .min_by_key(|s| lattice.rank(&s.effective_consistency));
            if let Some(w) = weak {
                let mut x = v(
                    PatternSloConsistency,
                    &term.id,
                    format!(
                        "path to `{}` degrades to `{}`, below required `{req}`",
                        term.id, w.effective_consistency
                    ),
                );
                x.path = w.path.clone();
                vs.push(x);
            }
        }
        out.paths.extend(slos);
    }
    out
}
