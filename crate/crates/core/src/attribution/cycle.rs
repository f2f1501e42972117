use std::collections::BTreeSet;

use thiserror::Error;

use super::{
    apply_correction, link_citations, route, AttributionLog, AttributionRecord, Approvals, Classifier, LogEvent,
    Outcome, RouteContext, RuntimeSignal,
};
use crate::clock::Clock;
use crate::harness::{run_tiers, HostProfile, ImageRegistry, Runner, TierReport};
use crate::intent::{validate_intent, IntentSpec, ValidationReport};
use crate::operator::{GuaranteeTable, OperatorDag, OperatorTypeRegistry};
use crate::planner::{select_products, synthesize_dag, PhysicalPlan, SynthesisRules};
use crate::render::{build_brief, render, ArtifactSet, DeploymentBrief};
use crate::skill::SkillCatalog;

pub struct CycleInputs<'a> {
    pub cycle: u32,
    pub intent: &'a IntentSpec,
    pub catalog: SkillCatalog,
    pub profile: HostProfile,
    pub runner: &'a mut dyn Runner,
    pub approvals: &'a Approvals,
    pub clock: &'a dyn Clock,
    pub registry: &'a OperatorTypeRegistry,
    pub images: &'a ImageRegistry,
    pub classifier: &'a Classifier,
    /// Everything logged by earlier cycles; used to link citations.
    pub prior_log: &'a AttributionLog,
}

#[derive(Debug, Clone)]
pub struct CycleResult {
    pub validation: ValidationReport,
    pub dag: Option<OperatorDag>,
    pub plan: Option<PhysicalPlan>,
    pub brief: Option<DeploymentBrief>,
    pub artifacts: Option<ArtifactSet>,
    pub report: Option<TierReport>,
    pub signals: Vec<RuntimeSignal>,
    pub records: Vec<AttributionRecord>,
    /// Parallel to `records`.
    pub outcomes: Vec<Outcome>,
    /// New log events, in append order.
    pub events: Vec<LogEvent>,
    pub catalog: SkillCatalog,
    pub profile: HostProfile,
}

impl CycleResult {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_some_and(TierReport::passed)
    }
}

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("{stage}: {code}: {message}")]
    Stage {
        stage: &'static str,
        code: String,
        message: String,
    },
}

impl CycleError {
    pub fn code(&self) -> &str {
        match self {
            CycleError::Stage { code, .. } => code,
        }
    }

    fn at(stage: &'static str, code: &str, message: impl ToString) -> Self {
        CycleError::Stage {
            stage,
            code: code.to_string(),
            message: message.to_string(),
        }
    }
}

/// validate → synthesize → select → render → run tiers → classify → route
/// → apply, once.
pub fn run_cycle(input: CycleInputs<'_>) -> Result<CycleResult, CycleError> {
    let CycleInputs {
        cycle,
        intent,
        mut catalog,
        mut profile,
        runner,
        approvals,
        clock,
        registry,
        images,
        classifier,
        prior_log,
    } = input;

    let validated = validate_intent(intent);
    let mut result = CycleResult {
        validation: validated.report.clone(),
        dag: None,
        plan: None,
        brief: None,
        artifacts: None,
        report: None,
        signals: Vec::new(),
        records: Vec::new(),
        outcomes: Vec::new(),
        events: Vec::new(),
        catalog: SkillCatalog::new(),
        profile: HostProfile::default(),
    };
    let intent = &validated.defaulted;
    let empty = ArtifactSet::default();

    let signals = if validated.report.valid() {
        let dag = synthesize_dag(intent, registry, &SynthesisRules::default(), &GuaranteeTable::default())
            .map_err(|e| CycleError::at("synthesize", e.code(), &e))?
            .remove(0);
        let plan = select_products(&dag, &catalog, intent, registry)
            .map_err(|e| CycleError::at("select", e.code(), &e))?
            .remove(0);
        let brief = build_brief(&plan, intent);
        let artifacts = render(&brief, &plan, &catalog, intent).map_err(|e| CycleError::at("render", e.code(), &e))?;
        let report = run_tiers(&artifacts, runner, &profile);
        let _ = runner.teardown();
        result.events.extend(link_citations(prior_log, &artifacts, &catalog, cycle));
        let signals = classifier.classify_report(&report);
        result.dag = Some(dag);
        result.plan = Some(plan);
        result.brief = Some(brief);
        result.artifacts = Some(artifacts);
        result.report = Some(report);
        signals
    } else {
        let signals = classifier.classify_validation(&validated.report);
        if signals.is_empty() {
            let codes: Vec<&str> = validated.report.hard_errors.iter().map(|f| f.code.as_str()).collect();
            return Err(CycleError::at("validate", "INTENT_INVALID", codes.join(", ")));
        }
        signals
    };

    let signals: Vec<RuntimeSignal> = signals
        .into_iter()
        .map(|mut s| {
            s.id = format!("c{cycle}-{}", s.id);
            s
        })
        .collect();
    let ctx = RouteContext {
        intent,
        artifacts: result.artifacts.as_ref().unwrap_or(&empty),
        registry: images,
    };
    let mut n = 0;
    for s in &signals {
        for mut r in route(s, &ctx) {
            n += 1;
            r.id = format!("c{cycle}-r{n}");
            if let super::ProposedAction::SkillPatch { patch } = &mut r.proposed_action {
                patch.provenance.signal_id = s.id.clone();
            }
            if let super::ProposedAction::PolicyEntry { entry } = &mut r.proposed_action {
                entry.provenance = s.id.clone();
            }
            let outcome = apply_correction(&r, approvals.approves(&r), &mut catalog, &mut profile, clock);
            result.events.push(LogEvent::Attribution {
                cycle,
                signal: s.clone(),
                record: r.clone(),
                outcome: outcome.clone(),
            });
            result.records.push(r);
            result.outcomes.push(outcome);
        }
    }
    result.signals = signals;
    result.catalog = catalog;
    result.profile = profile;
    Ok(result)
}

/// `(fixed, total)`: how many of `before` no longer appear in `after`.
pub fn fixed_count(before: &[RuntimeSignal], after: &[RuntimeSignal]) -> (usize, usize) {
    let now: BTreeSet<_> = after.iter().map(RuntimeSignal::key).collect();
    let fixed = before.iter().filter(|s| !now.contains(&s.key())).count();
    (fixed, before.len())
}
