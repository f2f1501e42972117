//! The L4 loop: type runtime signals, route each to the layer that owns the
//! violated decision, apply the matching correction, and keep an
//! append-only log linking signal, patch, and the next citation.

mod classify;
mod cycle;
mod log;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::Clock;
use crate::harness::{HostProfile, ImageRegistry, PolicyEntry};
use crate::intent::IntentSpec;
use crate::planner::PRODUCER;
use crate::render::ArtifactSet;
use crate::skill::{apply_patch, PatchOp, Provenance, SkillCatalog, SkillPatch};

pub use classify::{Classifier, ClassifierError, ClassifierRule, RuntimeSignal, SignalClass, SignalSource};
pub use cycle::{fixed_count, run_cycle, CycleError, CycleInputs, CycleResult};
pub use log::{link_citations, AttributionLog, LogEvent};

/// Host ports remapped by an auto policy land this far above the original.
pub const PORT_REMAP_OFFSET: u16 = 10000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    L1,
    L2,
    L3,
    L4,
    #[serde(rename = "L4_host")]
    L4Host,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::L1 => "L1",
            Layer::L2 => "L2",
            Layer::L3 => "L3",
            Layer::L4 => "L4",
            Layer::L4Host => "L4_host",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditUnit {
    IntentRevision,
    PlanAlternative,
    SkillPatch,
    CodePatch,
    PolicyEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Auto,
    Reviewer,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposedAction {
    SkillPatch { patch: SkillPatch },
    PolicyEntry { entry: PolicyEntry },
    Rerender { reason: String },
    Surface { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub id: String,
    pub signal_id: String,
    pub class: SignalClass,
    pub layer: Layer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguous_alternatives: Option<BTreeSet<Layer>>,
    pub edit_unit: EditUnit,
    pub policy: Policy,
    pub proposed_action: ProposedAction,
    /// Set on the reviewer-gated skill patch that accompanies an auto host
    /// policy entry.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub companion: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl AttributionRecord {
    /// Correct when the routed layer, or any admissible alternative, is
    /// `truth`.
    pub fn admits(&self, truth: Layer) -> bool {
        self.layer == truth
            || self
                .ambiguous_alternatives
                .as_ref()
                .is_some_and(|alts| alts.contains(&truth))
    }

    pub fn patch(&self) -> Option<&SkillPatch> {
        match &self.proposed_action {
            ProposedAction::SkillPatch { patch } => Some(patch),
            _ => None,
        }
    }
}

/// What routing may consult besides the signal. The artifacts stand in for
/// the plan: they carry the service-to-system map and the rendered ports.
#[derive(Debug, Clone, Copy)]
pub struct RouteContext<'a> {
    pub intent: &'a IntentSpec,
    pub artifacts: &'a ArtifactSet,
    pub registry: &'a ImageRegistry,
}

impl RouteContext<'_> {
    fn system_of_service(&self, service: &str) -> Option<String> {
        self.artifacts.services.get(service).cloned()
    }

    /// System whose skill should carry a client library the service needs:
    /// for a producer, the system it writes to.
    fn library_owner(&self, service: &str) -> Option<String> {
        let sys = self.system_of_service(service)?;
        if sys != PRODUCER {
            return Some(sys);
        }
        let m = self.artifacts.manifest(service)?;
        m.targets.first().map(|t| t.system.clone())
    }

    fn container_port(&self, service: &str, host: u16) -> Option<u16> {
        let doc: serde_yaml::Value = serde_yaml::from_str(&self.artifacts.compose).ok()?;
        doc.get("services")?
            .get(service)?
            .get("ports")?
            .as_sequence()?
            .iter()
            .filter_map(|p| p.as_str()?.split_once(':'))
            .find(|(h, _)| h.parse() == Ok(host))
            .and_then(|(_, c)| c.parse().ok())
            .or_else(|| self.first_container_port(service))
    }

    fn first_container_port(&self, service: &str) -> Option<u16> {
        let doc: serde_yaml::Value = serde_yaml::from_str(&self.artifacts.compose).ok()?;
        let first = doc.get("services")?.get(service)?.get("ports")?.as_sequence()?.first()?.as_str()?;
        first.split_once(':')?.1.parse().ok()
    }
}

fn record(signal: &RuntimeSignal, layer: Layer, edit_unit: EditUnit, policy: Policy, action: ProposedAction) -> AttributionRecord {
    AttributionRecord {
        id: String::new(),
        signal_id: signal.id.clone(),
        class: signal.class,
        layer,
        ambiguous_alternatives: None,
        edit_unit,
        policy,
        proposed_action: action,
        companion: false,
        note: None,
    }
}

fn surface(message: impl Into<String>) -> ProposedAction {
    ProposedAction::Surface {
        message: message.into(),
    }
}

fn skill_patch(signal: &RuntimeSignal, target: String, path: &str, value: serde_json::Value, note: String) -> ProposedAction {
    ProposedAction::SkillPatch {
        patch: SkillPatch {
            target,
            path: path.parse().expect("static field path"),
            op: PatchOp::AddEntry,
            value,
            provenance: Provenance {
                signal_id: signal.id.clone(),
                note,
            },
        },
    }
}

/// Routes one signal. Host mismatches yield the auto policy record followed
/// by a reviewer-gated companion skill patch; every other class yields one
/// record. Record ids are left empty for the caller to assign.
pub fn route(signal: &RuntimeSignal, ctx: &RouteContext<'_>) -> Vec<AttributionRecord> {
    let service = signal.service.as_deref().unwrap_or_default();
    let raw = signal.field("raw").unwrap_or_default();
    match signal.class {
        SignalClass::InfeasibleIntent => vec![record(
            signal,
            Layer::L1,
            EditUnit::IntentRevision,
            Policy::User,
            surface(format!("intent cannot be satisfied as declared: {raw}")),
        )],
        SignalClass::PatternSloMismatch => {
            let lag = signal.field("lag_events").unwrap_or("?");
            let mut r = record(
                signal,
                Layer::L2,
                EditUnit::SkillPatch,
                Policy::Reviewer,
                surface(format!(
                    "consumer lag {lag} events at {} events/s ingest; either tighten the skill's \
                     throughput claim for the consumer or pick a plan alternative with more headroom",
                    ctx.intent.ingest_rate()
                )),
            );
            r.ambiguous_alternatives = Some(BTreeSet::from([Layer::L2, Layer::L3]));
            r.note = Some("plan_alternative also admissible".into());
            vec![r]
        }
        SignalClass::CompositionGapImage => {
            let system = ctx.system_of_service(service).unwrap_or_else(|| service.to_string());
            let failing = signal.field("image").unwrap_or_default();
            let image = ctx.registry.by_repo(failing).unwrap_or(failing).to_string();
            vec![record(
                signal,
                Layer::L3,
                EditUnit::SkillPatch,
                Policy::Reviewer,
                skill_patch(
                    signal,
                    system,
                    "operational.recommended_images",
                    json!(image),
                    format!("`{failing}` could not be pulled"),
                ),
            )]
        }
        SignalClass::CompositionGapLibrary => {
            let system = ctx.library_owner(service).unwrap_or_else(|| service.to_string());
            let module = signal.field("module").unwrap_or_default();
            let root = module.split('.').next().unwrap_or(module);
            vec![record(
                signal,
                Layer::L3,
                EditUnit::SkillPatch,
                Policy::Reviewer,
                skill_patch(
                    signal,
                    system,
                    "operational.required_client_libraries",
                    json!({"runtime": "python", "package": root.replace('_', "-")}),
                    format!("`{service}` failed to import `{module}`"),
                ),
            )]
        }
        SignalClass::CompositionGapDdl => {
            let system = ctx.system_of_service(service).unwrap_or_else(|| service.to_string());
            let column_type = signal.field("column_type").unwrap_or("DateTime64");
            let base = crate::skill::ddl::base_type(column_type).to_string();
            let column = signal.field("column").unwrap_or("event_time");
            vec![record(
                signal,
                Layer::L3,
                EditUnit::SkillPatch,
                Policy::Reviewer,
                skill_patch(
                    signal,
                    system,
                    "anti_patterns",
                    json!({
                        "scenario": format!("TTL expression on a {base} column"),
                        "reason": format!("TTL rejected `{column}` of type {column_type}"),
                        "alternative": format!("Wrap: TTL toDateTime({column}) + INTERVAL ..."),
                        "severity": "hard_limit",
                        "matchers": [{"kind": "column_type", "column_type": base, "clause": "TTL"}],
                    }),
                    raw.to_string(),
                ),
            )]
        }
        SignalClass::CodegenSlip => vec![record(
            signal,
            Layer::L4,
            EditUnit::CodePatch,
            Policy::Auto,
            ProposedAction::Rerender {
                reason: raw.to_string(),
            },
        )],
        SignalClass::HostEnvMismatch => {
            let port: Option<u16> = signal.field("port").and_then(|p| p.parse().ok());
            let Some(port) = port else {
                // No port in the payload: nothing concrete to remap.
                return vec![record(
                    signal,
                    Layer::L4Host,
                    EditUnit::PolicyEntry,
                    Policy::Auto,
                    surface(format!("host conflict without a port: {raw}")),
                )];
            };
            let remap = port.saturating_add(PORT_REMAP_OFFSET);
            let primary = record(
                signal,
                Layer::L4Host,
                EditUnit::PolicyEntry,
                Policy::Auto,
                ProposedAction::PolicyEntry {
                    entry: PolicyEntry {
                        key: format!("port_remap.{port}"),
                        value: json!(remap),
                        provenance: signal.id.clone(),
                    },
                },
            );
            let mut out = vec![primary];
            if let Some(system) = ctx.system_of_service(service) {
                let container = ctx.container_port(service, port).unwrap_or(port);
                let mut companion = record(
                    signal,
                    Layer::L3,
                    EditUnit::SkillPatch,
                    Policy::Reviewer,
                    skill_patch(
                        signal,
                        system,
                        "operational.known_host_port_conflicts",
                        json!({"port": container, "remap_to": remap, "reason": format!("host port {port} was occupied")}),
                        raw.to_string(),
                    ),
                );
                companion.companion = true;
                out.push(companion);
            }
            out
        }
        SignalClass::AcceptanceFailureGeneric => {
            let mut r = record(
                signal,
                Layer::L4,
                EditUnit::CodePatch,
                Policy::Auto,
                ProposedAction::Rerender {
                    reason: raw.to_string(),
                },
            );
            r.note = Some("unclassified failure; raw payload attached".into());
            vec![r]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    PatchApplied { patch_id: String, field: String },
    PolicyWritten { key: String },
    /// The policy key was already present; entries are never rewritten.
    PolicyPresent { key: String },
    RerenderRequested,
    Surfaced,
    Deferred,
    Failed { error: String },
}

/// Reviewer decisions: everything, or a set of record ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Approvals {
    pub all: bool,
    pub ids: BTreeSet<String>,
}

impl Approvals {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn everything() -> Self {
        Self {
            all: true,
            ids: BTreeSet::new(),
        }
    }

    pub fn of(ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            all: false,
            ids: ids.into_iter().map(Into::into).collect(),
        }
    }

    pub fn approves(&self, record: &AttributionRecord) -> bool {
        self.all || self.ids.contains(&record.id)
    }
}

/// Executes auto actions, reviewer actions only when approved, and never
/// user actions.
pub fn apply_correction(
    record: &AttributionRecord,
    approved: bool,
    catalog: &mut SkillCatalog,
    profile: &mut HostProfile,
    clock: &dyn Clock,
) -> Outcome {
    match record.policy {
        Policy::User => return Outcome::Surfaced,
        Policy::Reviewer if !approved => return Outcome::Deferred,
        _ => {}
    }
    match &record.proposed_action {
        ProposedAction::SkillPatch { patch } => match apply_patch(catalog, patch, clock) {
            Ok(next) => {
                *catalog = next;
                Outcome::PatchApplied {
                    patch_id: patch.id(),
                    field: patch.field(),
                }
            }
            Err(e) => Outcome::Failed {
                error: format!("{}: {e}", e.code()),
            },
        },
        ProposedAction::PolicyEntry { entry } => {
            if profile.add_policy(entry.clone()) {
                Outcome::PolicyWritten { key: entry.key.clone() }
            } else {
                Outcome::PolicyPresent { key: entry.key.clone() }
            }
        }
        ProposedAction::Rerender { .. } => Outcome::RerenderRequested,
        ProposedAction::Surface { .. } => Outcome::Surfaced,
    }
}
