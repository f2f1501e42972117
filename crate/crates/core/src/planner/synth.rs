use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::consistency::ConsistencyLevel;
use crate::intent::{Condition, IntentSpec};
use crate::operator::{
    validate_dag, Edge, GuaranteeTable, OperatorDag, OperatorNode, OperatorType,
    OperatorTypeRegistry, Violation,
};

const DEFAULT_RULES: &str = include_str!("../../config/synthesis.yaml");

/// DAG candidates returned at most.
pub const MAX_DAG_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct When {
    #[serde(default)]
    pub all: Vec<Condition>,
    #[serde(default)]
    pub any: Vec<Condition>,
    #[serde(default)]
    pub none: Vec<Condition>,
}

impl When {
    pub fn holds(&self, doc: &Value) -> bool {
        self.all.iter().all(|c| c.holds(doc))
            && (self.any.is_empty() || self.any.iter().any(|c| c.holds(doc)))
            && !self.none.iter().any(|c| c.holds(doc))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRule {
    pub id: String,
    pub op_type: OperatorType,
    #[serde(default)]
    pub role: String,
    #[serde(default)]
    pub serves: Vec<String>,
    #[serde(default)]
    pub writes: Vec<String>,
    #[serde(default)]
    pub data_models: Vec<String>,
    #[serde(default)]
    pub required_consistency: Option<String>,
    #[serde(default)]
    pub when: When,
}

/// The default synthesizer's rule table: an ordered chain of pipeline
/// stages plus terminal nodes that attach to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRules {
    pub stages: Vec<NodeRule>,
    pub terminals: Vec<NodeRule>,
}

impl Default for SynthesisRules {
    fn default() -> Self {
        Self::from_yaml(DEFAULT_RULES).expect("shipped synthesis rules parse")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("no topology rule covers access patterns {0:?}")]
    NoTopologyRule(Vec<String>),
    #[error("every synthesized candidate was rejected ({} violations)", .0.len())]
    NoValidCandidate(Vec<Violation>),
}

impl SynthesisError {
    pub fn code(&self) -> &'static str {
        match self {
            SynthesisError::NoTopologyRule(_) => "NO_TOPOLOGY_RULE",
            SynthesisError::NoValidCandidate(_) => "NO_VALID_CANDIDATE",
        }
    }
}

impl SynthesisRules {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }
}

/// Rule-based DAG synthesis.
///
/// Active stages form a chain behind a single INGEST; every active terminal
/// attaches to one chain position. The default attachment (all terminals on
/// the last stage) is tried first; alternatives move terminals to earlier
/// positions. Each candidate is stamped from `guarantees` and kept only if
/// [`validate_dag`] accepts it.
pub fn synthesize_dag(
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
    rules: &SynthesisRules,
    guarantees: &GuaranteeTable,
) -> Result<Vec<OperatorDag>, SynthesisError> {
    let doc = intent.to_json_value();
    let usable = |r: &&NodeRule| registry.contains(&r.op_type) && r.when.holds(&doc);
    let stages: Vec<&NodeRule> = rules.stages.iter().filter(usable).collect();
    let terminals: Vec<&NodeRule> = rules.terminals.iter().filter(usable).collect();

    let mut base = OperatorDag::default();
    base.nodes.push(OperatorNode::new("ingest", OperatorType::INGEST, ""));
    for r in stages.iter().chain(&terminals) {
        base.nodes.push(instantiate(r, intent, registry));
    }

    let covered: BTreeSet<&str> = base
        .nodes
        .iter()
        .flat_map(|n| n.serves.iter().chain(&n.writes))
        .map(String::as_str)
        .collect();
    let uncovered: Vec<String> = intent
        .reads()
        .iter()
        .chain(intent.writes())
        .filter(|t| !covered.contains(t.as_str()))
        .cloned()
        .collect();
    if !uncovered.is_empty() {
        return Err(SynthesisError::NoTopologyRule(uncovered));
    }

    let mut chain: Vec<&str> = vec!["ingest"];
    chain.extend(stages.iter().map(|r| r.id.as_str()));
    for w in chain.windows(2) {
        base.edges.push(Edge::bare(w[0], w[1]));
    }

    // Attachment choices per terminal, preferred (last stage) first.
    let options: Vec<Vec<usize>> = terminals
        .iter()
        .map(|t| {
            (0..chain.len())
                .rev()
                .filter(|&i| {
                    let from = &base.node(chain[i]).expect("chain node").op_type;
                    registry.allows_edge(from, &t.op_type)
                })
                .collect()
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return Err(SynthesisError::NoTopologyRule(
            terminals
                .iter()
                .zip(&options)
                .filter(|(_, o)| o.is_empty())
                .flat_map(|(t, _)| t.serves.clone())
                .collect(),
        ));
    }

    let mut combos = cartesian(&options);
    // Fewest displaced terminals first, then generation order.
    combos.sort_by_key(|c| c.iter().zip(&options).filter(|(a, o)| **a != o[0]).count());

    let mut out = Vec::new();
    let mut last_rejection = Vec::new();
    for combo in combos {
        let mut dag = base.clone();
        for (t, &pos) in terminals.iter().zip(&combo) {
            dag.edges.push(Edge::bare(chain[pos], &t.id));
        }
        guarantees.stamp(&mut dag);
        let verdict = validate_dag(&dag, intent, registry);
        if verdict.accepted() {
            out.push(dag);
            if out.len() == MAX_DAG_CANDIDATES {
                break;
            }
        } else if last_rejection.is_empty() {
            last_rejection = verdict.violations;
        }
    }
    if out.is_empty() {
        return Err(SynthesisError::NoValidCandidate(last_rejection));
    }
    Ok(out)
}

fn instantiate(r: &NodeRule, intent: &IntentSpec, registry: &OperatorTypeRegistry) -> OperatorNode {
    let keep = |tags: &[String], declared: &[String]| -> Vec<String> {
        tags.iter().filter(|t| declared.contains(t)).cloned().collect()
    };
    let lattice = registry.lattice();
    let declared: Vec<&ConsistencyLevel> = intent.consistency_levels().map(|(_, l)| l).collect();
    let required = match r.required_consistency.as_deref() {
        None => None,
        Some("strongest") => declared
            .iter()
            .copied()
            .max_by_key(|l| lattice.rank(l))
            .cloned(),
        Some("weakest") => lattice.meet_all(declared.iter().copied()),
        Some(level) => Some(ConsistencyLevel::new(level)),
    };
    OperatorNode {
        id: r.id.clone(),
        op_type: r.op_type.clone(),
        role: r.role.clone(),
        serves: keep(&r.serves, intent.reads()),
        writes: keep(&r.writes, intent.writes()),
        data_models: keep(&r.data_models, intent.primary_types()),
        required_consistency: required,
    }
}

fn cartesian(options: &[Vec<usize>]) -> Vec<Vec<usize>> {
    options.iter().fold(vec![Vec::new()], |acc, opts| {
        acc.into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(*o);
                    p
                })
            })
            .collect()
    })
}
