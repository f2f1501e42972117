use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::registry::OperatorType;
use crate::consistency::ConsistencyLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delivery {
    AtMostOnce,
    AtLeastOnce,
    ExactlyOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNode {
    pub id: String,
    pub op_type: OperatorType,
    #[serde(default)]
    pub role: String,
    /// Read access patterns answered by this node (terminal types only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub serves: Vec<String>,
    /// Write access patterns this node absorbs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub writes: Vec<String>,
    /// Data-model tags a product filling this node must support.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data_models: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_consistency: Option<ConsistencyLevel>,
}

impl OperatorNode {
    pub fn new(id: &str, op_type: &str, role: &str) -> Self {
        Self {
            id: id.to_string(),
            op_type: OperatorType::new(op_type),
            role: role.to_string(),
            serves: Vec::new(),
            writes: Vec::new(),
            data_models: Vec::new(),
            required_consistency: None,
        }
    }

    pub fn serving(mut self, tags: &[&str]) -> Self {
        self.serves = tags.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn requiring(mut self, level: ConsistencyLevel) -> Self {
        self.required_consistency = Some(level);
        self
    }

    /// Serving endpoints: anything with a non-empty `serves`, plus explicit
    /// SERVE nodes.
    pub fn is_serving(&self) -> bool {
        !self.serves.is_empty() || self.op_type.is(OperatorType::SERVE)
    }

    /// Display label, e.g. `STORE(analytics)`.
    pub fn label(&self) -> String {
        if self.role.is_empty() {
            self.op_type.to_string()
        } else {
            format!("{}({})", self.op_type, self.role)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGuarantee {
    pub latency_contribution_ms: f64,
    pub throughput_capacity_eps: f64,
    pub consistency: ConsistencyLevel,
    pub delivery: Delivery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_contribution_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_capacity_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivery: Option<Delivery>,
}

impl Edge {
    pub fn bare(from: &str, to: &str) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            latency_contribution_ms: None,
            throughput_capacity_eps: None,
            consistency: None,
            delivery: None,
        }
    }

    pub fn with(from: &str, to: &str, g: EdgeGuarantee) -> Self {
        let mut e = Self::bare(from, to);
        e.set_guarantee(g);
        e
    }

    pub fn set_guarantee(&mut self, g: EdgeGuarantee) {
        self.latency_contribution_ms = Some(g.latency_contribution_ms);
        self.throughput_capacity_eps = Some(g.throughput_capacity_eps);
        self.consistency = Some(g.consistency);
        self.delivery = Some(g.delivery);
    }

    /// All four guarantees, or `None` if the edge is (partially) unannotated.
    pub fn guarantee(&self) -> Option<EdgeGuarantee> {
        Some(EdgeGuarantee {
            latency_contribution_ms: self.latency_contribution_ms?,
            throughput_capacity_eps: self.throughput_capacity_eps?,
            consistency: self.consistency.clone()?,
            delivery: self.delivery?,
        })
    }

    pub fn is_annotated(&self) -> bool {
        self.guarantee().is_some()
    }

    pub fn key(&self) -> String {
        format!("{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatorDag {
    pub nodes: Vec<OperatorNode>,
    pub edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct DagDoc {
    dag: OperatorDag,
}

impl OperatorDag {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str::<DagDoc>(doc).map(|d| d.dag)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(&DagDoc { dag: self.clone() }).expect("dag serializes")
    }

    pub fn node(&self, id: &str) -> Option<&OperatorNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut OperatorNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn edge_mut(&mut self, from: &str, to: &str) -> Option<&mut Edge> {
        self.edges.iter_mut().find(|e| e.from == from && e.to == to)
    }

    pub fn nodes_of_type<'a>(&'a self, t: &'a str) -> impl Iterator<Item = &'a OperatorNode> {
        self.nodes.iter().filter(move |n| n.op_type.is(t))
    }

    pub fn ingest_nodes(&self) -> impl Iterator<Item = &OperatorNode> {
        self.nodes_of_type(OperatorType::INGEST)
    }

    pub fn serving_nodes(&self) -> impl Iterator<Item = &OperatorNode> {
        self.nodes.iter().filter(|n| n.is_serving())
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges
            .iter()
            .filter(move |e| e.from == id)
            .map(|e| e.to.as_str())
    }

    pub fn predecessors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges
            .iter()
            .filter(move |e| e.to == id)
            .map(|e| e.from.as_str())
    }

    /// Node ids reachable from `start` (inclusive) over edges whose endpoints
    /// exist.
    pub fn reachable_from(&self, start: &str) -> BTreeSet<String> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            if ids.contains(e.from.as_str()) && ids.contains(e.to.as_str()) {
                adj.entry(e.from.as_str()).or_default().push(e.to.as_str());
            }
        }
        let mut seen = BTreeSet::new();
        if !ids.contains(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen.insert(start.to_string());
        while let Some(n) = queue.pop_front() {
            for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(m.to_string()) {
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Node ids lying on some cycle; empty iff the graph is acyclic.
    pub fn cyclic_nodes(&self) -> BTreeSet<String> {
        let mut indeg: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
        for e in &self.edges {
            if indeg.contains_key(e.from.as_str()) {
                if let Some(d) = indeg.get_mut(e.to.as_str()) {
                    *d += 1;
                }
            }
        }
        let mut queue: VecDeque<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut removed = BTreeSet::new();
        while let Some(n) = queue.pop_front() {
            removed.insert(n);
            for e in self.edges.iter().filter(|e| e.from == n) {
                if let Some(d) = indeg.get_mut(e.to.as_str()) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(e.to.as_str());
                    }
                }
            }
        }
        // Kahn leaves cycle members plus everything downstream of them; keep
        // only nodes that can get back to themselves.
        indeg
            .keys()
            .filter(|n| !removed.contains(*n))
            .filter(|n| {
                self.edges
                    .iter()
                    .filter(|e| e.from == **n)
                    .any(|e| self.reachable_from(&e.to).contains(**n))
            })
            .map(|n| n.to_string())
            .collect()
    }
}
