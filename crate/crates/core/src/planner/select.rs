use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::intent::{CostPreference, IntentSpec};
use crate::operator::{validate_dag, OperatorDag, OperatorNode, OperatorType, OperatorTypeRegistry};
use crate::render::templates::{fill, retention_interval, table_for_role, SystemTemplates};
use crate::skill::{
    check_composition, match_anti_patterns, CompositionVerdict, MatchContext, Severity, Skill,
    SkillCatalog,
};

use super::PlanError;

/// Plans returned at most.
pub const MAX_PLANS: usize = 10;

/// Pseudo-system standing in for the generated producer behind INGEST nodes.
pub const PRODUCER: &str = "producer";
/// Connector recorded between two nodes bound to the same system.
pub const INTERNAL: &str = "internal";
/// Connector recorded on edges leaving the producer: the producer writes
/// through the target's own client.
pub const NATIVE_CLIENT: &str = "native_client";
pub const DEFAULT_CITATION: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDecision {
    pub key: String,
    pub value: Value,
    /// Skill field path, or `default` when nothing in the catalog informed
    /// the value.
    pub citation: String,
}

impl ConfigDecision {
    fn new(key: impl Into<String>, value: Value, citation: Option<String>) -> Self {
        Self {
            key: key.into(),
            value,
            citation: citation.unwrap_or_else(|| DEFAULT_CITATION.to_string()),
        }
    }

    pub fn is_cited(&self) -> bool {
        self.citation != DEFAULT_CITATION
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub system: String,
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub decisions: Vec<ConfigDecision>,
}

impl Binding {
    pub fn decision(&self, key: &str) -> Option<&ConfigDecision> {
        self.decisions.iter().find(|d| d.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorChoice {
    pub from: String,
    pub to: String,
    pub connector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub advisories: Vec<String>,
}

/// Lexicographic ordering key; smaller ranks first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankKey {
    /// Distinct systems when the intent prefers simplicity, else 0.
    pub simplicity: usize,
    pub monthly_usd: f64,
    pub soft_matches: usize,
    pub systems: Vec<String>,
}

impl RankKey {
    pub fn compare(&self, other: &Self) -> Ordering {
        self.simplicity
            .cmp(&other.simplicity)
            .then(self.monthly_usd.total_cmp(&other.monthly_usd))
            .then(self.soft_matches.cmp(&other.soft_matches))
            .then(self.systems.cmp(&other.systems))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalPlan {
    /// The DAG with edge capacities tightened by the bound skills.
    pub dag: OperatorDag,
    pub bindings: BTreeMap<String, Binding>,
    /// Keyed by edge (`from->to`).
    pub connectors: BTreeMap<String, ConnectorChoice>,
    pub estimated_monthly_usd: f64,
    pub plan_rank_key: RankKey,
    pub catalog_lock_hash: String,
}

impl PhysicalPlan {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("plan serializes")
    }

    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    pub fn system_of(&self, node: &str) -> Option<&str> {
        self.bindings.get(node).map(|b| b.system.as_str())
    }

    /// Systems in first-binding order, excluding the producer.
    pub fn systems(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for n in &self.dag.nodes {
            if let Some(s) = self.system_of(&n.id) {
                if s != PRODUCER && !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// First node bound to `system`; its id names the system's service.
    pub fn owner_of(&self, system: &str) -> Option<&str> {
        self.dag
            .nodes
            .iter()
            .find(|n| self.system_of(&n.id) == Some(system))
            .map(|n| n.id.as_str())
    }

    /// Every skill field path a decision or connector choice cites.
    pub fn citations(&self) -> BTreeSet<String> {
        let decisions = self
            .bindings
            .values()
            .flat_map(|b| &b.decisions)
            .filter(|d| d.is_cited())
            .map(|d| d.citation.clone());
        let connectors = self.connectors.values().filter_map(|c| c.citation.clone());
        decisions.chain(connectors).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Elimination {
    pub node: String,
    pub system: String,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rejection {
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    /// Per-node survivors of the capability and anti-pattern gates.
    pub candidates: BTreeMap<String, Vec<String>>,
    pub eliminations: Vec<Elimination>,
    /// Distinct assignment-level rejection reasons.
    pub rejections: Vec<Rejection>,
    pub rejected_assignments: usize,
}

impl PlanTrace {
    pub fn codes(&self) -> BTreeSet<&str> {
        self.eliminations
            .iter()
            .map(|e| e.code.as_str())
            .chain(self.rejections.iter().map(|r| r.code.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Ranked and capped.
    pub plans: Vec<PhysicalPlan>,
    /// Every assignment (node id -> system) that passed the four gates,
    /// before ranking, capping, and revalidation.
    pub survivors: Vec<BTreeMap<String, String>>,
    pub trace: PlanTrace,
}

/// Ranked plans for `dag`, or `PLAN_INFEASIBLE` with the elimination trace.
pub fn select_products(
    dag: &OperatorDag,
    catalog: &SkillCatalog,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> Result<Vec<PhysicalPlan>, PlanError> {
    let report = select_products_detailed(dag, catalog, intent, registry)?;
    if report.plans.is_empty() {
        return Err(PlanError::Infeasible(Box::new(report.trace)));
    }
    Ok(report.plans)
}

/// Per-(node, system) outcome of gates 1 and 2.
struct NodeOption<'a> {
    skill: &'a Skill,
    decisions: Vec<ConfigDecision>,
    soft: usize,
}

pub fn select_products_detailed(
    dag: &OperatorDag,
    catalog: &SkillCatalog,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> Result<SelectionReport, PlanError> {
    let verdict = validate_dag(dag, intent, registry);
    if !verdict.accepted() {
        return Err(PlanError::DagRejected(verdict.violations));
    }
    let templates = SystemTemplates::default();
    let intent_doc = intent.to_json_value();
    let mut trace = PlanTrace::default();

    // Gates 1 and 2, per node.
    let mut options: Vec<Vec<NodeOption>> = Vec::new();
    for node in &dag.nodes {
        let mut opts = Vec::new();
        if !node.op_type.is(OperatorType::INGEST) {
            for skill in catalog.skills() {
                let reasons = capability_gaps(node, skill, registry);
                if reasons.first().map(|r| r.0) == Some("TYPE_MISMATCH") {
                    continue;
                }
                let decisions = node_decisions(node, skill, intent, registry, &templates);
                let ctx = match_context(node, &intent_doc, &decisions, intent, skill, &templates, registry);
                let matches = match_anti_patterns(skill, &ctx);
                let mut all = reasons;
                for m in matches.iter().filter(|m| m.severity == Severity::HardLimit) {
                    all.push((
                        "HARD_ANTI_PATTERN",
                        format!("anti_patterns[{}] `{}`: {}", m.index, m.scenario, m.detail),
                    ));
                }
                if all.is_empty() {
                    let soft = matches.iter().filter(|m| m.severity == Severity::Soft).count();
                    opts.push(NodeOption { skill, decisions, soft });
                } else {
                    for (code, detail) in all {
                        trace.eliminations.push(Elimination {
                            node: node.id.clone(),
                            system: skill.system.clone(),
                            code: code.to_string(),
                            detail,
                        });
                    }
                }
            }
            if opts.is_empty() {
                trace.eliminations.push(Elimination {
                    node: node.id.clone(),
                    system: String::new(),
                    code: "NO_CANDIDATE".into(),
                    detail: format!("no skill can fill {}", node.label()),
                });
            }
        }
        trace.candidates.insert(
            node.id.clone(),
            if node.op_type.is(OperatorType::INGEST) {
                vec![PRODUCER.to_string()]
            } else {
                opts.iter().map(|o| o.skill.system.clone()).collect()
            },
        );
        options.push(opts);
    }

    // Gates 3 and 4 over assignments, by depth-first search with pruning.
    let budget = intent.budget_usd().unwrap_or(f64::INFINITY);
    let mut search = Search {
        dag,
        options: &options,
        budget,
        chosen: vec![None; dag.nodes.len()],
        survivors: Vec::new(),
        rejections: BTreeSet::new(),
        rejected: 0,
    };
    search.visit(0);
    let survivors = search.survivors;
    trace.rejections = search.rejections.into_iter().collect();
    trace.rejected_assignments = search.rejected;

    let preference = intent.preference().unwrap_or(CostPreference::Simplicity);
    let mut plans = Vec::new();
    for choice in &survivors {
        let plan = assemble(dag, choice, &options, catalog, &templates, preference);
        let revalidated = validate_dag(&plan.dag, intent, registry);
        if revalidated.accepted() {
            plans.push(plan);
        } else {
            for v in revalidated.violations {
                trace.rejections.push(Rejection {
                    code: v.code.to_string(),
                    detail: format!("after tightening for {}: {}", plan.plan_rank_key.systems.join("+"), v.message),
                });
            }
            trace.rejected_assignments += 1;
        }
    }
    plans.sort_by(|a, b| a.plan_rank_key.compare(&b.plan_rank_key));
    plans.truncate(MAX_PLANS);

    let survivors = survivors
        .iter()
        .map(|choice| {
            dag.nodes
                .iter()
                .enumerate()
                .map(|(pos, n)| {
                    let sys = match choice[pos] {
                        Some(i) => options[pos][i].skill.system.clone(),
                        None => PRODUCER.to_string(),
                    };
                    (n.id.clone(), sys)
                })
                .collect()
        })
        .collect();

    Ok(SelectionReport {
        plans,
        survivors,
        trace,
    })
}

/// Gate 1: type, data model, access pattern, and consistency coverage.
/// A type mismatch is reported alone.
fn capability_gaps(
    node: &OperatorNode,
    skill: &Skill,
    registry: &OperatorTypeRegistry,
) -> Vec<(&'static str, String)> {
    if !skill.fills(&node.op_type) {
        return vec![("TYPE_MISMATCH", format!("{} does not fill {}", skill.system, node.op_type))];
    }
    let caps = &skill.capabilities;
    let mut out = Vec::new();
    let missing_models: Vec<&str> = node
        .data_models
        .iter()
        .filter(|m| !caps.data_models.contains(m))
        .map(String::as_str)
        .collect();
    if !missing_models.is_empty() {
        out.push(("DATA_MODEL_UNSUPPORTED", format!("missing {}", missing_models.join(", "))));
    }
    let missing_patterns: Vec<&str> = node
        .serves
        .iter()
        .chain(&node.writes)
        .filter(|p| !caps.access_patterns.contains(p))
        .map(String::as_str)
        .collect();
    if !missing_patterns.is_empty() {
        out.push((
            "ACCESS_PATTERN_UNSUPPORTED",
            format!("missing {}", missing_patterns.join(", ")),
        ));
    }
    if let Some(req) = &node.required_consistency {
        let lattice = registry.lattice();
        if !caps.consistency.iter().any(|c| lattice.at_least(c, req)) {
            out.push(("CONSISTENCY_UNSUPPORTED", format!("requires {req}")));
        }
    }
    out
}

fn config_doc(decisions: &[ConfigDecision]) -> Value {
    Value::Object(
        decisions
            .iter()
            .map(|d| (d.key.clone(), d.value.clone()))
            .collect(),
    )
}

fn match_context(
    node: &OperatorNode,
    intent_doc: &Value,
    decisions: &[ConfigDecision],
    intent: &IntentSpec,
    skill: &Skill,
    templates: &SystemTemplates,
    registry: &OperatorTypeRegistry,
) -> MatchContext {
    let mut ctx = MatchContext::for_binding(node);
    ctx.intent = intent_doc.clone();
    ctx.config = config_doc(decisions);
    let ttl = decisions
        .iter()
        .find(|d| d.key == TTL_KEY)
        .and_then(|d| d.value.as_str());
    if let Some(sql) = ddl_preview(node, &skill.system, intent, templates, registry, ttl) {
        ctx.ddl.push(sql);
    }
    ctx
}

pub const TTL_KEY: &str = "ddl.ttl_expression";

/// Init DDL this binding would emit, with `ttl` as the TTL expression.
pub fn ddl_preview(
    node: &OperatorNode,
    system: &str,
    intent: &IntentSpec,
    templates: &SystemTemplates,
    registry: &OperatorTypeRegistry,
    ttl: Option<&str>,
) -> Option<String> {
    let template = templates.init_template(system, &node.role)?;
    let holes = BTreeMap::from([
        ("table", table_for_role(&node.role, intent, registry.lattice())),
        ("ttl", ttl.map(|t| format!("TTL {t}")).unwrap_or_default()),
    ]);
    fill(template, &holes).ok()
}

/// Decisions a skill informs for one binding: image and host ports (see
/// [`assemble`] for which binding keeps them) and the TTL expression.
fn node_decisions(
    node: &OperatorNode,
    skill: &Skill,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
    templates: &SystemTemplates,
) -> Vec<ConfigDecision> {
    let system = skill.system.as_str();
    let mut out = Vec::new();
    let ops = &skill.operational;
    out.push(match ops.recommended_images.first() {
        Some(img) => ConfigDecision::new(
            "image",
            json!(img),
            Some(format!("{system}.operational.recommended_images[0]")),
        ),
        None => ConfigDecision::new("image", json!(templates.default_image(system)), None),
    });
    for &port in templates.ports(system) {
        let key = format!("host_port.{port}");
        out.push(
            match ops
                .known_host_port_conflicts
                .iter()
                .enumerate()
                .find(|(_, c)| c.port == port)
            {
                Some((i, c)) => ConfigDecision::new(
                    key,
                    json!(c.remap_to),
                    Some(format!("{system}.operational.known_host_port_conflicts[{i}]")),
                ),
                None => ConfigDecision::new(key, json!(port), None),
            },
        );
    }
    if let Some(d) = ttl_decision(node, skill, intent, registry, templates) {
        out.push(d);
    }
    out
}

/// Direct TTL on the time column unless a hard column-type anti-pattern
/// forbids it, in which case the column is wrapped and the entry cited.
fn ttl_decision(
    node: &OperatorNode,
    skill: &Skill,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
    templates: &SystemTemplates,
) -> Option<ConfigDecision> {
    let t = templates.get(&skill.system)?;
    templates.init_template(&skill.system, &node.role)?;
    let column = t.ttl_column.as_deref()?;
    let interval = retention_interval(intent.retention_years())?;
    let direct = format!("{column} + {interval}");
    let preview = ddl_preview(node, &skill.system, intent, templates, registry, Some(&direct))?;
    let ctx = MatchContext::default().with_ddl(preview);
    let blocking = match_anti_patterns(skill, &ctx)
        .into_iter()
        .find(|m| m.severity == Severity::HardLimit && m.matcher.kind() == "column_type");
    match (blocking, t.ttl_wrap.as_deref()) {
        (None, _) => Some(ConfigDecision::new(TTL_KEY, json!(direct), None)),
        (Some(m), Some(wrap)) => Some(ConfigDecision::new(
            TTL_KEY,
            json!(format!("{wrap}({column}) + {interval}")),
            Some(format!("{}.anti_patterns[{}]", skill.system, m.index)),
        )),
        // No known rewrite: keep the direct form and let the hard gate
        // eliminate the binding.
        (Some(_), None) => Some(ConfigDecision::new(TTL_KEY, json!(direct), None)),
    }
}

struct Search<'a, 'b> {
    dag: &'a OperatorDag,
    options: &'a [Vec<NodeOption<'b>>],
    budget: f64,
    /// Option index per node; `None` for INGEST nodes.
    chosen: Vec<Option<usize>>,
    survivors: Vec<Vec<Option<usize>>>,
    rejections: BTreeSet<Rejection>,
    rejected: usize,
}

impl Search<'_, '_> {
    fn system(&self, pos: usize) -> Option<&Skill> {
        self.chosen[pos].map(|i| self.options[pos][i].skill)
    }

    fn visit(&mut self, pos: usize) {
        if pos == self.dag.nodes.len() {
            self.survivors.push(self.chosen.clone());
            return;
        }
        if self.dag.nodes[pos].op_type.is(OperatorType::INGEST) {
            self.chosen[pos] = None;
            self.visit(pos + 1);
            return;
        }
        for i in 0..self.options[pos].len() {
            self.chosen[pos] = Some(i);
            if let Some(r) = self.check(pos) {
                self.rejections.insert(r);
                self.rejected += 1;
                continue;
            }
            self.visit(pos + 1);
        }
        self.chosen[pos] = None;
    }

    /// Gates 3 and 4 for everything decidable once `pos` is assigned.
    fn check(&self, pos: usize) -> Option<Rejection> {
        let index = |id: &str| self.dag.nodes.iter().position(|n| n.id == id);
        for e in &self.dag.edges {
            let (Some(a), Some(b)) = (index(&e.from), index(&e.to)) else {
                continue;
            };
            if (a != pos && b != pos) || a > pos || b > pos {
                continue;
            }
            let (Some(pa), Some(pb)) = (self.system(a), self.system(b)) else {
                continue;
            };
            if pa.system == pb.system {
                continue;
            }
            if let CompositionVerdict::NoDeclaredConnector { producer, consumer } =
                check_composition(pa, pb)
            {
                return Some(Rejection {
                    code: "NO_DECLARED_CONNECTOR".into(),
                    detail: format!("{} -> {}: {producer} -> {consumer}", e.from, e.to),
                });
            }
        }
        let mut seen = BTreeSet::new();
        let mut spend = 0.0;
        for p in 0..=pos {
            if let Some(s) = self.system(p) {
                if seen.insert(s.system.as_str()) {
                    spend += s.capabilities.monthly_usd_estimate;
                }
            }
        }
        (spend > self.budget).then(|| Rejection {
            code: "BUDGET_EXCEEDED".into(),
            detail: format!(
                "{} cost {spend} exceeds budget {}",
                seen.into_iter().collect::<Vec<_>>().join("+"),
                self.budget
            ),
        })
    }
}

fn assemble(
    dag: &OperatorDag,
    choice: &[Option<usize>],
    options: &[Vec<NodeOption>],
    catalog: &SkillCatalog,
    templates: &SystemTemplates,
    preference: CostPreference,
) -> PhysicalPlan {
    let skill_at = |pos: usize| choice[pos].map(|i| options[pos][i].skill);
    let pos_of = |id: &str| dag.nodes.iter().position(|n| n.id == id).expect("edge endpoint");

    let mut bindings = BTreeMap::new();
    let mut owners: BTreeSet<&str> = BTreeSet::new();
    let mut soft = 0;
    for (pos, node) in dag.nodes.iter().enumerate() {
        let binding = match choice[pos] {
            None => Binding {
                system: PRODUCER.to_string(),
                version: String::new(),
                decisions: producer_decisions(dag, node, &skill_at, &pos_of, templates),
            },
            Some(i) => {
                let opt = &options[pos][i];
                soft += opt.soft;
                let owner = owners.insert(opt.skill.system.as_str());
                Binding {
                    system: opt.skill.system.clone(),
                    version: opt.skill.version.clone(),
                    decisions: opt
                        .decisions
                        .iter()
                        .filter(|d| owner || d.key == TTL_KEY)
                        .cloned()
                        .collect(),
                }
            }
        };
        bindings.insert(node.id.clone(), binding);
    }

    let mut connectors = BTreeMap::new();
    let mut tightened = dag.clone();
    for (e, t) in dag.edges.iter().zip(tightened.edges.iter_mut()) {
        let (a, b) = (pos_of(&e.from), pos_of(&e.to));
        let choice = match (skill_at(a), skill_at(b)) {
            (None, _) | (_, None) => ConnectorChoice {
                from: e.from.clone(),
                to: e.to.clone(),
                connector: NATIVE_CLIENT.into(),
                citation: None,
                advisories: Vec::new(),
            },
            (Some(pa), Some(pb)) if pa.system == pb.system => ConnectorChoice {
                from: e.from.clone(),
                to: e.to.clone(),
                connector: INTERNAL.into(),
                citation: None,
                advisories: Vec::new(),
            },
            (Some(pa), Some(pb)) => {
                let v = check_composition(pa, pb);
                let advisories = match &v {
                    CompositionVerdict::Connector { advisories, .. } => advisories.clone(),
                    CompositionVerdict::NoDeclaredConnector { .. } => Vec::new(),
                };
                ConnectorChoice {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    connector: v.connector().unwrap_or_default().to_string(),
                    citation: v.citation(),
                    advisories,
                }
            }
        };
        connectors.insert(e.key(), choice);
        if let (Some(cap), Some(skill)) = (t.throughput_capacity_eps, skill_at(b)) {
            if let Some(max) = skill.capabilities.max_throughput_eps() {
                t.throughput_capacity_eps = Some(cap.min(max));
            }
        }
    }

    let mut systems: Vec<String> = Vec::new();
    let mut cost = 0.0;
    for pos in 0..dag.nodes.len() {
        if let Some(s) = skill_at(pos) {
            if !systems.contains(&s.system) {
                systems.push(s.system.clone());
                cost += s.capabilities.monthly_usd_estimate;
            }
        }
    }
    systems.sort();
    let key = RankKey {
        simplicity: if preference == CostPreference::Simplicity {
            systems.len()
        } else {
            0
        },
        monthly_usd: cost,
        soft_matches: soft,
        systems,
    };
    PhysicalPlan {
        dag: tightened,
        bindings,
        connectors,
        estimated_monthly_usd: cost,
        plan_rank_key: key,
        catalog_lock_hash: catalog.lock_hash(),
    }
}

/// Client libraries the producer needs for each system it writes to, cited
/// from that system's `required_client_libraries` when declared.
fn producer_decisions<'s>(
    dag: &OperatorDag,
    node: &OperatorNode,
    skill_at: &impl Fn(usize) -> Option<&'s Skill>,
    pos_of: &impl Fn(&str) -> usize,
    templates: &SystemTemplates,
) -> Vec<ConfigDecision> {
    let runtime = templates.producer.runtime.as_str();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for succ in dag.successors(&node.id) {
        let Some(skill) = skill_at(pos_of(succ)) else {
            continue;
        };
        if !seen.insert(skill.system.clone()) {
            continue;
        }
        for (i, lib) in skill.operational.required_client_libraries.iter().enumerate() {
            if lib.runtime != runtime {
                continue;
            }
            out.push(ConfigDecision::new(
                format!("client_library.{}", lib.package),
                json!(lib.to_string()),
                Some(format!(
                    "{}.operational.required_client_libraries[{i}]",
                    skill.system
                )),
            ));
        }
    }
    out
}

/// Framework-side check of a plan produced by any selector: every binding
/// fills its node's type with a loaded skill and trips no hard
/// anti-pattern, and every cross-system edge has a declared connector.
pub fn audit_plan(
    plan: &PhysicalPlan,
    catalog: &SkillCatalog,
    intent: &IntentSpec,
    registry: &OperatorTypeRegistry,
) -> Vec<Elimination> {
    let templates = SystemTemplates::default();
    let intent_doc = intent.to_json_value();
    let mut out = Vec::new();
    let mut flag = |node: &str, system: &str, code: &str, detail: String| {
        out.push(Elimination {
            node: node.to_string(),
            system: system.to_string(),
            code: code.to_string(),
            detail,
        })
    };
    for node in &plan.dag.nodes {
        let Some(b) = plan.bindings.get(&node.id) else {
            flag(&node.id, "", "UNBOUND_NODE", format!("{} has no binding", node.id));
            continue;
        };
        if b.system == PRODUCER && node.op_type.is(OperatorType::INGEST) {
            continue;
        }
        let Some(skill) = catalog.get(&b.system) else {
            flag(&node.id, &b.system, "UNKNOWN_SKILL", format!("{} is not in the catalog", b.system));
            continue;
        };
        for (code, detail) in capability_gaps(node, skill, registry) {
            flag(&node.id, &b.system, code, detail);
        }
        let ctx = match_context(node, &intent_doc, &b.decisions, intent, skill, &templates, registry);
        for m in match_anti_patterns(skill, &ctx) {
            if m.severity == Severity::HardLimit {
                flag(&node.id, &b.system, "HARD_ANTI_PATTERN", m.detail);
            }
        }
    }
    for e in &plan.dag.edges {
        let (Some(a), Some(b)) = (plan.system_of(&e.from), plan.system_of(&e.to)) else {
            continue;
        };
        if a == PRODUCER || b == PRODUCER || a == b {
            continue;
        }
        let declared = match (catalog.get(a), catalog.get(b)) {
            (Some(pa), Some(pb)) => check_composition(pa, pb).connector().is_some(),
            _ => false,
        };
        if !declared {
            flag(&e.to, b, "NO_DECLARED_CONNECTOR", format!("{a} -> {b}"));
        }
    }
    out
}
