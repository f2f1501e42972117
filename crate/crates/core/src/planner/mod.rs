//! Default sub-agents for the two bounded searches: rule-based DAG synthesis
//! and product selection against the skill catalog.

mod select;
pub mod subagent;
mod synth;

use thiserror::Error;

use crate::operator::Violation;

pub use select::{
    audit_plan, ddl_preview, select_products, select_products_detailed, Binding, ConfigDecision,
    ConnectorChoice, Elimination, PhysicalPlan, PlanTrace, RankKey, Rejection, SelectionReport,
    DEFAULT_CITATION, INTERNAL, MAX_PLANS, NATIVE_CLIENT, PRODUCER, TTL_KEY,
};
pub use synth::{synthesize_dag, NodeRule, SynthesisError, SynthesisRules, When, MAX_DAG_CANDIDATES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("dag rejected before selection ({} violations)", .0.len())]
    DagRejected(Vec<Violation>),
    #[error("no feasible assignment: {}", .0.codes().into_iter().collect::<Vec<_>>().join(", "))]
    Infeasible(Box<PlanTrace>),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::DagRejected(_) => "DAG_REJECTED",
            PlanError::Infeasible(_) => "PLAN_INFEASIBLE",
        }
    }

    pub fn trace(&self) -> Option<&PlanTrace> {
        match self {
            PlanError::Infeasible(t) => Some(t),
            PlanError::DagRejected(_) => None,
        }
    }
}
