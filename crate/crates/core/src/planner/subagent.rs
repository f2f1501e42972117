//! The seam between the framework and the workers searching inside each
//! contract. Workers propose; the framework re-checks every proposal with
//! its own gates before anything downstream sees it.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{audit_plan, select_products, synthesize_dag, PhysicalPlan, SynthesisRules};
use crate::intent::IntentSpec;
use crate::operator::{validate_dag, GuaranteeTable, OperatorDag, OperatorTypeRegistry};
use crate::render::{render, ArtifactSet, DeploymentBrief};
use crate::skill::SkillCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubAgentRole {
    DagSynthesizer,
    ProductSelector,
    ArtifactGenerator,
}

#[derive(Debug, Error)]
pub enum SubAgentError {
    #[error("{0}")]
    Failed(String),
    #[error("sub-agent produced no acceptable candidate: {0}")]
    NoAcceptableCandidate(String),
    #[error("external sub-agent: {0}")]
    Io(#[from] std::io::Error),
    #[error("external sub-agent response: {0}")]
    Protocol(#[from] serde_json::Error),
}

pub trait DagSynthesizer {
    fn synthesize(
        &self,
        intent: &IntentSpec,
        registry: &OperatorTypeRegistry,
    ) -> Result<Vec<OperatorDag>, SubAgentError>;
}

pub trait ProductSelector {
    fn select(
        &self,
        dag: &OperatorDag,
        catalog: &SkillCatalog,
        intent: &IntentSpec,
        registry: &OperatorTypeRegistry,
    ) -> Result<Vec<PhysicalPlan>, SubAgentError>;
}

pub trait ArtifactGenerator {
    fn generate(
        &self,
        brief: &DeploymentBrief,
        plan: &PhysicalPlan,
        catalog: &SkillCatalog,
        intent: &IntentSpec,
    ) -> Result<ArtifactSet, SubAgentError>;
}

/// The rule-table synthesizer, the gated selector, and the template renderer.
#[derive(Debug, Clone, Default)]
pub struct RuleBased {
    pub rules: SynthesisRules,
    pub guarantees: GuaranteeTable,
}

impl DagSynthesizer for RuleBased {
    fn synthesize(
        &self,
        intent: &IntentSpec,
        registry: &OperatorTypeRegistry,
    ) -> Result<Vec<OperatorDag>, SubAgentError> {
        synthesize_dag(intent, registry, &self.rules, &self.guarantees)
            .map_err(|e| SubAgentError::Failed(format!("{}: {e}", e.code())))
    }
}

impl ProductSelector for RuleBased {
    fn select(
        &self,
        dag: &OperatorDag,
        catalog: &SkillCatalog,
        intent: &IntentSpec,
        registry: &OperatorTypeRegistry,
    ) -> Result<Vec<PhysicalPlan>, SubAgentError> {
        select_products(dag, catalog, intent, registry)
            .map_err(|e| SubAgentError::Failed(format!("{}: {e}", e.code())))
    }
}

impl ArtifactGenerator for RuleBased {
    fn generate(
        &self,
        brief: &DeploymentBrief,
        plan: &PhysicalPlan,
        catalog: &SkillCatalog,
        intent: &IntentSpec,
    ) -> Result<ArtifactSet, SubAgentError> {
        render(brief, plan, catalog, intent).map_err(|e| SubAgentError::Failed(format!("{}: {e}", e.code())))
    }
}

/// A worker in another process: one JSON request on stdin, one JSON
/// response on stdout.
#[derive(Debug, Clone)]
pub struct ExternalSubAgent {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Serialize)]
struct Request<'a, T> {
    role: SubAgentRole,
    request: &'a T,
}

impl ExternalSubAgent {
    pub fn new(command_line: &str) -> Self {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        Self {
            program: parts.next().unwrap_or_default(),
            args: parts.collect(),
        }
    }

    fn invoke<T: Serialize, R: DeserializeOwned>(
        &self,
        role: SubAgentRole,
        request: &T,
    ) -> Result<R, SubAgentError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let body = serde_json::to_vec(&Request { role, request })?;
        child.stdin.take().expect("piped stdin").write_all(&body)?;
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(SubAgentError::Failed(format!(
                "`{}` exited with {}",
                self.program, out.status
            )));
        }
        Ok(serde_json::from_slice(&out.stdout)?)
    }
}

impl DagSynthesizer for ExternalSubAgent {
    fn synthesize(
        &self,
        intent: &IntentSpec,
        _registry: &OperatorTypeRegistry,
    ) -> Result<Vec<OperatorDag>, SubAgentError> {
        #[derive(Serialize)]
        struct Req<'a> {
            intent: &'a IntentSpec,
        }
        self.invoke(SubAgentRole::DagSynthesizer, &Req { intent })
    }
}

impl ProductSelector for ExternalSubAgent {
    fn select(
        &self,
        dag: &OperatorDag,
        catalog: &SkillCatalog,
        intent: &IntentSpec,
        _registry: &OperatorTypeRegistry,
    ) -> Result<Vec<PhysicalPlan>, SubAgentError> {
        #[derive(Serialize)]
        struct Req<'a> {
            dag: &'a OperatorDag,
            skills: Vec<&'a crate::skill::Skill>,
            intent: &'a IntentSpec,
        }
        self.invoke(
            SubAgentRole::ProductSelector,
            &Req {
                dag,
                skills: catalog.skills().collect(),
                intent,
            },
        )
    }
}

impl ArtifactGenerator for ExternalSubAgent {
    fn generate(
        &self,
        brief: &DeploymentBrief,
        plan: &PhysicalPlan,
        _catalog: &SkillCatalog,
        intent: &IntentSpec,
    ) -> Result<ArtifactSet, SubAgentError> {
        #[derive(Serialize)]
        struct Req<'a> {
            brief: &'a DeploymentBrief,
            plan: &'a PhysicalPlan,
            intent: &'a IntentSpec,
        }
        self.invoke(SubAgentRole::ArtifactGenerator, &Req { brief, plan, intent })
    }
}

/// Synthesizes with `agent` and keeps only candidates the framework's own
/// DAG check accepts.
pub fn gated_synthesis(
    agent: &dyn DagSynthesizer,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> Result<Vec<OperatorDag>, SubAgentError> {
    let mut reasons = Vec::new();
    let kept: Vec<OperatorDag> = agent
        .synthesize(intent, registry)?
        .into_iter()
        .filter(|d| {
            let v = validate_dag(d, intent, registry);
            if !v.accepted() {
                reasons.extend(v.codes().into_iter().map(|c| c.to_string()));
            }
            v.accepted()
        })
        .collect();
    if kept.is_empty() {
        return Err(SubAgentError::NoAcceptableCandidate(reasons.join(", ")));
    }
    Ok(kept)
}

/// Selects with `agent` and drops any plan that fails the framework audit
/// (hard anti-patterns, undeclared connectors, unbound nodes) or whose DAG
/// no longer validates.
pub fn gated_selection(
    agent: &dyn ProductSelector,
    dag: &OperatorDag,
    catalog: &SkillCatalog,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> Result<Vec<PhysicalPlan>, SubAgentError> {
    let mut reasons = Vec::new();
    let kept: Vec<PhysicalPlan> = agent
        .select(dag, catalog, intent, registry)?
        .into_iter()
        .filter(|p| {
            let mut issues: Vec<String> = audit_plan(p, catalog, intent, registry)
                .into_iter()
                .map(|e| e.code)
                .collect();
            let v = validate_dag(&p.dag, intent, registry);
            issues.extend(v.codes().into_iter().map(|c| c.to_string()));
            let ok = issues.is_empty();
            reasons.extend(issues);
            ok
        })
        .collect();
    if kept.is_empty() {
        return Err(SubAgentError::NoAcceptableCandidate(reasons.join(", ")));
    }
    Ok(kept)
}
