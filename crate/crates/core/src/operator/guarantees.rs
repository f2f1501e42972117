use serde::{Deserialize, Serialize};

use super::dag::{Delivery, EdgeGuarantee, OperatorDag};
use crate::consistency::ConsistencyLevel;

const DEFAULT_TABLE: &str = include_str!("../../config/guarantees.yaml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeEntry {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_role: Option<String>,
    pub latency_ms: f64,
    pub throughput_eps: f64,
    pub consistency: ConsistencyLevel,
    pub delivery: Delivery,
}

impl GuaranteeEntry {
    pub fn guarantee(&self) -> EdgeGuarantee {
        EdgeGuarantee {
            latency_contribution_ms: self.latency_ms,
            throughput_capacity_eps: self.throughput_eps,
            consistency: self.consistency.clone(),
            delivery: self.delivery,
        }
    }
}

/// Default edge guarantees keyed by endpoint types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeTable {
    pub edges: Vec<GuaranteeEntry>,
}

impl Default for GuaranteeTable {
    fn default() -> Self {
        Self::from_yaml(DEFAULT_TABLE).expect("shipped guarantee table parses")
    }
}

impl GuaranteeTable {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    /// Role-specific rows win over the generic row for the same type pair.
    pub fn lookup(&self, from: &str, to: &str, to_role: &str) -> Option<EdgeGuarantee> {
        let pair = |e: &&GuaranteeEntry| e.from == from && e.to == to;
        self.edges
            .iter()
            .filter(pair)
            .find(|e| e.to_role.as_deref() == Some(to_role))
            .or_else(|| self.edges.iter().filter(pair).find(|e| e.to_role.is_none()))
            .map(GuaranteeEntry::guarantee)
    }

    /// Fills every unannotated edge the table covers; returns how many were
    /// stamped. Annotated edges are left alone.
    pub fn stamp(&self, dag: &mut OperatorDag) -> usize {
        let mut stamped = 0;
        let types: Vec<(String, String, String)> = dag
            .nodes
            .iter()
            .map(|n| (n.id.clone(), n.op_type.to_string(), n.role.clone()))
            .collect();
        let find = |id: &str| types.iter().find(|(n, _, _)| n == id);
        for edge in dag.edges.iter_mut().filter(|e| !e.is_annotated()) {
            let (Some(from), Some(to)) = (find(&edge.from), find(&edge.to)) else {
                continue;
            };
            if let Some(g) = self.lookup(&from.1, &to.1, &to.2) {
                edge.set_guarantee(g);
                stamped += 1;
            }
        }
        stamped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_override_wins() {
        let t = GuaranteeTable::default();
        let generic = t.lookup("TRANSFORM", "STORE", "operational").unwrap();
        let analytics = t.lookup("TRANSFORM", "STORE", "analytics").unwrap();
        assert_eq!(generic.latency_contribution_ms, 4.0);
        assert_eq!(analytics.latency_contribution_ms, 1795.0);
        assert_eq!(analytics.consistency, ConsistencyLevel::eventual());
    }

    #[test]
    fn unknown_pair_is_none() {
        assert!(GuaranteeTable::default().lookup("SERVE", "INGEST", "").is_none());
    }
}
