use std::fs;
use std::path::Path;

use dds_core::attribution::{
    apply_correction, fixed_count, link_citations, route, run_cycle, Approvals, AttributionLog, Classifier,
    CycleError, CycleInputs, LogEvent, Outcome, RouteContext, RuntimeSignal,
};
use dds_core::clock::{Clock, FixedClock, SystemClock};
use dds_core::harness::{run_tiers, ComposeRunner, FaultInjection, ImageRegistry, Runner, SimulatedRunner, TierReport};
use dds_core::intent::{parse_intent, validate_intent, IntentSpec};
use dds_core::operator::{validate_dag, GuaranteeTable, OperatorDag, OperatorTypeRegistry};
use dds_core::planner::{select_products_detailed, synthesize_dag, PhysicalPlan, PlanError, SynthesisRules};
use dds_core::render::{build_brief, render, t0_check, ArtifactSet, COMPOSE_PATH};
use dds_core::skill::write_lock;

use crate::workdir::*;
use crate::{Failure, RunnerKind};

pub fn approvals(ids: Vec<String>, all: bool) -> Approvals {
    if all {
        Approvals::everything()
    } else {
        Approvals::of(ids)
    }
}

pub struct Context {
    wd: Workdir,
    clock: Box<dyn Clock>,
    seed: u64,
    registry: OperatorTypeRegistry,
    images: ImageRegistry,
    classifier: Classifier,
}

fn input_err(what: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{what}: {e}"))
}

fn parse_injections(specs: &[String]) -> Result<Vec<FaultInjection>, Failure> {
    specs
        .iter()
        .map(|s| s.parse().map_err(|e| input_err("--inject", e)))
        .collect()
}

fn copy_in(src: &Path, wd: &Workdir, rel: &str) -> Result<(), Failure> {
    let text = fs::read_to_string(src).map_err(|e| input_err(&src.display().to_string(), e))?;
    wd.write(rel, &text)
}

fn print_signal(s: &RuntimeSignal) {
    let svc = s.service.as_deref().unwrap_or("-");
    println!("  signal {} {} ({svc})", s.id, s.class);
}

fn describe(outcome: &Outcome) -> String {
    match outcome {
        Outcome::PatchApplied { field, .. } => format!("patched {field}"),
        Outcome::PolicyWritten { key } => format!("policy {key} written"),
        Outcome::PolicyPresent { key } => format!("policy {key} already present"),
        Outcome::RerenderRequested => "re-render requested".into(),
        Outcome::Surfaced => "surfaced".into(),
        Outcome::Deferred => "awaiting approval".into(),
        Outcome::Failed { error } => format!("failed: {error}"),
    }
}

fn print_entry(e: &Entry) {
    let r = &e.record;
    let alts = r
        .ambiguous_alternatives
        .as_ref()
        .map(|a| {
            let names: Vec<String> = a.iter().map(ToString::to_string).collect();
            format!(" (ambiguous: {})", names.join("/"))
        })
        .unwrap_or_default();
    println!(
        "  record {} <- {} {}{alts} {:?}/{:?}: {}",
        r.id,
        r.signal_id,
        r.layer,
        r.edit_unit,
        r.policy,
        describe(&e.outcome)
    );
}

fn renumber(signals: Vec<RuntimeSignal>, cycle: u32) -> Vec<RuntimeSignal> {
    signals
        .into_iter()
        .map(|mut s| {
            s.id = format!("c{cycle}-{}", s.id);
            s
        })
        .collect()
}

impl Context {
    pub fn new(root: &Path, clock: Option<&str>, seed: u64) -> Self {
        let clock: Box<dyn Clock> = match clock {
            Some(t) => Box::new(FixedClock(t.to_string())),
            None => Box::new(SystemClock),
        };
        Self {
            wd: Workdir::new(root),
            clock,
            seed,
            registry: OperatorTypeRegistry::default(),
            images: ImageRegistry::default(),
            classifier: Classifier::default(),
        }
    }

    fn intent(&self) -> Result<IntentSpec, Failure> {
        let text = self.wd.read(INTENT)?;
        let spec = parse_intent(&text).map_err(|e| input_err(INTENT, e))?;
        let out = validate_intent(&spec);
        if !out.report.valid() {
            let codes: Vec<&str> = out.report.hard_errors.iter().map(|f| f.code.as_str()).collect();
            return Err(Failure::Rejected(format!("intent has hard errors: {}", codes.join(", "))));
        }
        Ok(out.defaulted)
    }

    fn log(&self) -> Result<AttributionLog, Failure> {
        AttributionLog::load(&self.wd.path(LOG)).map_err(|e| input_err(LOG, e))
    }

    fn append_log(&self, events: &[LogEvent]) -> Result<(), Failure> {
        AttributionLog::append_to(&self.wd.path(LOG), events).map_err(|e| input_err(LOG, e))
    }

    /// Clears rendered output so a rejected stage leaves nothing behind.
    fn clear_downstream(&self) {
        self.wd.remove_dir(ARTIFACTS);
        let _ = fs::remove_file(self.wd.path(BRIEF));
    }

    pub fn validate(&self, path: &Path) -> Result<(), Failure> {
        let text = fs::read_to_string(path).map_err(|e| input_err(&path.display().to_string(), e))?;
        let spec = parse_intent(&text).map_err(|e| input_err(&path.display().to_string(), e))?;
        let out = validate_intent(&spec);
        self.wd.write(INTENT, &text)?;
        self.wd.write(VALIDATION, &out.report.to_yaml())?;
        let r = &out.report;
        println!(
            "validate: {} hard errors, {} soft warnings, {} defaults applied",
            r.hard_errors.len(),
            r.soft_warnings.len(),
            r.defaults_applied.len()
        );
        for f in &r.hard_errors {
            println!("  error {} [{}]: {}", f.code, f.dimension, f.message);
        }
        for f in &r.soft_warnings {
            println!("  warning {} [{}]: {}", f.code, f.dimension, f.message);
        }
        if r.valid() {
            Ok(())
        } else {
            let codes: Vec<&str> = r.hard_errors.iter().map(|f| f.code.as_str()).collect();
            Err(Failure::Rejected(codes.join(", ")))
        }
    }

    pub fn plan(&self, skills: Option<&Path>, dag: Option<&Path>) -> Result<(), Failure> {
        let intent = self.intent()?;
        if let Some(dir) = skills {
            self.wd.import_skills(dir)?;
        }
        let catalog = self.wd.catalog(&self.registry)?;

        let dag = match dag {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| input_err(&p.display().to_string(), e))?;
                OperatorDag::from_yaml(&text).map_err(|e| input_err(&p.display().to_string(), e))?
            }
            None => match synthesize_dag(&intent, &self.registry, &SynthesisRules::default(), &GuaranteeTable::default()) {
                Ok(mut dags) => dags.remove(0),
                Err(e) => {
                    self.clear_downstream();
                    return Err(Failure::Rejected(format!("{}: {e}", e.code())));
                }
            },
        };
        self.wd.write(DAG, &dag.to_yaml())?;
        let verdict = validate_dag(&dag, &intent, &self.registry);
        self.wd.save(DAG_VERDICT, &verdict)?;
        if !verdict.accepted() {
            self.clear_downstream();
            for v in &verdict.violations {
                println!("  {} {}: {}", v.code, v.subject, v.message);
            }
            let codes: Vec<String> = verdict.codes().iter().map(ToString::to_string).collect();
            return Err(Failure::Rejected(format!("DAG_REJECTED: {}", codes.join(", "))));
        }

        match select_products_detailed(&dag, &catalog, &intent, &self.registry) {
            Ok(report) => {
                self.wd.save(TRACE, &report.trace)?;
                let plan = &report.plans[0];
                self.wd.write(PLAN, &plan.to_yaml())?;
                self.wd.write(LOCK, &write_lock(&catalog))?;
                print_plan(plan, report.plans.len());
                Ok(())
            }
            Err(e) => {
                self.clear_downstream();
                if let PlanError::Infeasible(trace) = &e {
                    self.wd.save(TRACE, trace)?;
                }
                Err(Failure::Rejected(format!("{}: {e}", e.code())))
            }
        }
    }

    pub fn render(&self) -> Result<(), Failure> {
        let intent = self.intent()?;
        let plan = PhysicalPlan::from_yaml(&self.wd.read(PLAN)?).map_err(|e| input_err(PLAN, e))?;
        let catalog = self.wd.catalog(&self.registry)?;
        let brief = build_brief(&plan, &intent);
        self.wd.write(BRIEF, &brief.to_yaml())?;
        self.wd.remove_dir(ARTIFACTS);
        let set = render(&brief, &plan, &catalog, &intent).map_err(|e| Failure::Rejected(format!("{}: {e}", e.code())))?;
        set.write_to(&self.wd.path(ARTIFACTS)).map_err(|e| input_err(ARTIFACTS, e))?;
        let t0 = t0_check(&set);
        println!(
            "render: {} files, {} citations, T0 {}",
            set.files().len(),
            set.citation_index.len(),
            if t0.pass() { "✓" } else { "✗" }
        );
        Ok(())
    }

    fn artifacts(&self) -> Result<ArtifactSet, Failure> {
        self.wd.require(&format!("{ARTIFACTS}/{COMPOSE_PATH}"))?;
        ArtifactSet::read_from(&self.wd.path(ARTIFACTS)).map_err(|e| input_err(ARTIFACTS, e))
    }

    pub fn run(&self, kind: RunnerKind, injections: &[String], profile: Option<&Path>) -> Result<(), Failure> {
        let injections = parse_injections(injections)?;
        let artifacts = self.artifacts()?;
        let intent = self.intent()?;
        if let Some(p) = profile {
            copy_in(p, &self.wd, PROFILE)?;
        }
        let profile = self.wd.profile()?;
        let mut runner: Box<dyn Runner> = match kind {
            RunnerKind::Sim => Box::new(SimulatedRunner::new(injections)),
            RunnerKind::Compose => Box::new(ComposeRunner::new(self.wd.path(ARTIFACTS))),
        };
        let report = run_tiers(&artifacts, runner.as_mut(), &profile);
        let _ = runner.teardown();
        if let Some(out) = &report.outputs {
            self.wd.write(RUN, &out.to_yaml())?;
        }
        self.wd.write(TIERS, &report.to_yaml())?;
        println!("{}", report.summary());

        // Preview only: nothing is applied or logged until `attribute`.
        let cycle = self.wd.state()?.cycle + 1;
        let signals = renumber(self.classifier.classify_report(&report), cycle);
        let ctx = RouteContext {
            intent: &intent,
            artifacts: &artifacts,
            registry: &self.images,
        };
        for s in &signals {
            print_signal(s);
            for r in route(s, &ctx) {
                let alts = r
                    .ambiguous_alternatives
                    .map(|a| format!(" (ambiguous: {})", a.iter().map(ToString::to_string).collect::<Vec<_>>().join("/")))
                    .unwrap_or_default();
                println!("    -> {}{alts} {:?}", r.layer, r.edit_unit);
            }
        }
        self.wd.save(SIGNALS, &signals)?;
        if report.passed() {
            Ok(())
        } else {
            Err(Failure::Rejected(report.summary()))
        }
    }

    pub fn attribute(&self, approvals: &Approvals) -> Result<(), Failure> {
        let report: TierReport = self.wd.load(TIERS)?;
        let artifacts = self.artifacts()?;
        let intent = self.intent()?;
        let mut catalog = self.wd.catalog(&self.registry)?;
        let mut profile = self.wd.profile()?;
        let mut state = self.wd.state()?;
        let prior = self.log()?;
        let cycle = state.cycle + 1;

        let signals = renumber(self.classifier.classify_report(&report), cycle);
        let ctx = RouteContext {
            intent: &intent,
            artifacts: &artifacts,
            registry: &self.images,
        };
        let mut events = link_citations(&prior, &artifacts, &catalog, cycle);
        let mut entries = Vec::new();
        for s in &signals {
            for mut r in route(s, &ctx) {
                r.id = format!("c{cycle}-r{}", entries.len() + 1);
                let outcome = apply_correction(&r, approvals.approves(&r), &mut catalog, &mut profile, self.clock.as_ref());
                events.push(LogEvent::Attribution {
                    cycle,
                    signal: s.clone(),
                    record: r.clone(),
                    outcome: outcome.clone(),
                });
                entries.push(Entry {
                    signal: s.clone(),
                    record: r,
                    outcome,
                });
            }
        }
        println!("attribute: {} signals, {} records", signals.len(), entries.len());
        for e in &entries {
            print_entry(e);
        }
        self.append_log(&events)?;
        self.wd.save(SIGNALS, &signals)?;
        self.wd.save(RECORDS, &entries)?;
        self.wd.save_catalog(&catalog)?;
        self.wd.save(PROFILE, &profile)?;
        state.cycle = cycle;
        state.seed = self.seed;
        state.last_signals = signals;
        self.wd.save(STATE, &state)
    }

    pub fn patch(&self, approvals: &Approvals) -> Result<(), Failure> {
        let mut entries: Vec<Entry> = self.wd.load(RECORDS)?;
        let mut catalog = self.wd.catalog(&self.registry)?;
        let mut profile = self.wd.profile()?;
        let state = self.wd.state()?;
        let mut events = Vec::new();
        let mut pending = 0;
        for e in entries.iter_mut().filter(|e| e.outcome == Outcome::Deferred) {
            if !approvals.approves(&e.record) {
                pending += 1;
                continue;
            }
            e.outcome = apply_correction(&e.record, true, &mut catalog, &mut profile, self.clock.as_ref());
            events.push(LogEvent::Attribution {
                cycle: state.cycle,
                signal: e.signal.clone(),
                record: e.record.clone(),
                outcome: e.outcome.clone(),
            });
            print_entry(e);
        }
        if let Some(unknown) = approvals.ids.iter().find(|id| !entries.iter().any(|e| &e.record.id == *id)) {
            return Err(Failure::Input(format!("no record `{unknown}`")));
        }
        println!("patch: {} applied, {pending} still awaiting approval", events.len());
        self.append_log(&events)?;
        self.wd.save(RECORDS, &entries)?;
        self.wd.save_catalog(&catalog)?;
        self.wd.save(PROFILE, &profile)
    }

    pub fn cycle(
        &self,
        intent: Option<&Path>,
        skills: Option<&Path>,
        profile: Option<&Path>,
        injections: &[String],
        approvals: &Approvals,
    ) -> Result<(), Failure> {
        let injections = parse_injections(injections)?;
        if let Some(p) = intent {
            copy_in(p, &self.wd, INTENT)?;
        }
        if let Some(dir) = skills {
            self.wd.import_skills(dir)?;
        }
        if let Some(p) = profile {
            copy_in(p, &self.wd, PROFILE)?;
        }
        let text = self.wd.read(INTENT)?;
        let spec = parse_intent(&text).map_err(|e| input_err(INTENT, e))?;
        let catalog = self.wd.catalog(&self.registry)?;
        let profile = self.wd.profile()?;
        let mut state = self.wd.state()?;
        let prior = self.log()?;
        let cycle = state.cycle + 1;
        let mut runner = SimulatedRunner::new(injections);

        let result = run_cycle(CycleInputs {
            cycle,
            intent: &spec,
            catalog,
            profile,
            runner: &mut runner,
            approvals,
            clock: self.clock.as_ref(),
            registry: &self.registry,
            images: &self.images,
            classifier: &self.classifier,
            prior_log: &prior,
        });
        let result = match result {
            Ok(r) => r,
            Err(e @ CycleError::Stage { .. }) => {
                self.clear_downstream();
                return Err(Failure::Rejected(e.to_string()));
            }
        };

        self.wd.write(VALIDATION, &result.validation.to_yaml())?;
        if let Some(dag) = &result.dag {
            self.wd.write(DAG, &dag.to_yaml())?;
        }
        if let Some(plan) = &result.plan {
            self.wd.write(PLAN, &plan.to_yaml())?;
        }
        if let Some(brief) = &result.brief {
            self.wd.write(BRIEF, &brief.to_yaml())?;
        }
        self.wd.remove_dir(ARTIFACTS);
        if let Some(set) = &result.artifacts {
            set.write_to(&self.wd.path(ARTIFACTS)).map_err(|e| input_err(ARTIFACTS, e))?;
        }
        if let Some(report) = &result.report {
            if let Some(out) = &report.outputs {
                self.wd.write(RUN, &out.to_yaml())?;
            }
            self.wd.write(TIERS, &report.to_yaml())?;
        }
        let entries: Vec<Entry> = result
            .records
            .iter()
            .zip(&result.outcomes)
            .map(|(r, o)| Entry {
                signal: result
                    .signals
                    .iter()
                    .find(|s| s.id == r.signal_id)
                    .cloned()
                    .expect("record refers to a signal of this cycle"),
                record: r.clone(),
                outcome: o.clone(),
            })
            .collect();
        self.append_log(&result.events)?;
        self.wd.save(SIGNALS, &result.signals)?;
        self.wd.save(RECORDS, &entries)?;
        self.wd.save_catalog(&result.catalog)?;
        self.wd.save(PROFILE, &result.profile)?;

        match &result.report {
            Some(r) => println!("cycle {cycle}: {}", r.summary()),
            None => println!("cycle {cycle}: stopped at intent validation"),
        }
        if !state.last_signals.is_empty() {
            let (fixed, total) = fixed_count(&state.last_signals, &result.signals);
            println!("fixed {fixed}/{total}");
        }
        for s in &result.signals {
            print_signal(s);
        }
        for e in &entries {
            print_entry(e);
        }
        for ev in &result.events {
            if let LogEvent::Citation { citation, artifact, line, .. } = ev {
                println!("  cited {citation} at {artifact}:{line}");
            }
        }

        state.cycle = cycle;
        state.seed = self.seed;
        state.last_signals = result.signals.clone();
        self.wd.save(STATE, &state)?;
        if result.passed() {
            Ok(())
        } else {
            Err(Failure::Rejected(match &result.report {
                Some(r) => r.summary(),
                None => "intent revision required".into(),
            }))
        }
    }
}

fn print_plan(plan: &PhysicalPlan, alternatives: usize) {
    println!(
        "plan: {} systems, ${:.0}/month, {} ranked plan(s)",
        plan.systems().len(),
        plan.estimated_monthly_usd,
        alternatives
    );
    for (node, b) in &plan.bindings {
        println!("  {node} -> {}", b.system);
    }
    for c in plan.connectors.values() {
        println!("  {} -> {}: {}", c.from, c.to, c.connector);
    }
}
