//! Runner contract, host profiles, a deterministic simulated runner with
//! fault injection, and the T0/T1/T2 acceptance ladder.

mod compose;
mod sim;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::render::{t0_check, ArtifactSet, T0Finding};

pub use compose::ComposeRunner;
pub use sim::{ImageRegistry, SimulatedRunner};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub key: String,
    pub value: Value,
    /// Signal that caused the entry.
    pub provenance: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HostProfile {
    #[serde(default)]
    pub occupied_ports: BTreeSet<u16>,
    /// `runtime:package` entries already present on the host.
    #[serde(default)]
    pub available_packages: BTreeSet<String>,
    #[serde(default)]
    pub policy_entries: Vec<PolicyEntry>,
}

impl HostProfile {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("profile serializes")
    }

    /// Host port a mapping should use after `port_remap.<port>` policies.
    pub fn remapped(&self, port: u16) -> u16 {
        let key = format!("port_remap.{port}");
        self.policy_entries
            .iter()
            .find(|p| p.key == key)
            .and_then(|p| p.value.as_u64())
            .and_then(|v| u16::try_from(v).ok())
            .unwrap_or(port)
    }

    /// Appends unless an entry with the same key exists; entries are never
    /// rewritten. Returns whether anything was added.
    pub fn add_policy(&mut self, entry: PolicyEntry) -> bool {
        if self.policy_entries.iter().any(|p| p.key == entry.key) {
            return false;
        }
        self.policy_entries.push(entry);
        true
    }

    pub fn has_package(&self, spec: &str) -> bool {
        self.available_packages.contains(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Healthy,
    Unhealthy,
    Starting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerState {
    pub exit_code: i32,
    pub health: Health,
}

impl ContainerState {
    pub fn ok(&self) -> bool {
        self.exit_code == 0 && self.health == Health::Healthy
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmokeOutput {
    pub rows_returned: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag_events: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutputs {
    pub compose_stderr: String,
    pub container_states: BTreeMap<String, ContainerState>,
    pub container_logs: BTreeMap<String, String>,
    pub smoke_output: SmokeOutput,
}

impl RunOutputs {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("run outputs serialize")
    }

    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    pub fn failing_services(&self) -> Vec<String> {
        self.container_states
            .iter()
            .filter(|(_, s)| !s.ok())
            .map(|(n, _)| n.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    ImagePullFailure,
    HostPortConflict,
    LibraryMissing,
    DdlTypeConstraint,
    ConsumerLag,
}

impl FaultClass {
    pub const ALL: [FaultClass; 5] = [
        FaultClass::ImagePullFailure,
        FaultClass::HostPortConflict,
        FaultClass::LibraryMissing,
        FaultClass::DdlTypeConstraint,
        FaultClass::ConsumerLag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultClass::ImagePullFailure => "image_pull_failure",
            FaultClass::HostPortConflict => "host_port_conflict",
            FaultClass::LibraryMissing => "library_missing",
            FaultClass::DdlTypeConstraint => "ddl_type_constraint",
            FaultClass::ConsumerLag => "consumer_lag",
        }
    }
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub class: FaultClass,
    pub service: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

impl FaultInjection {
    pub fn new(class: FaultClass, service: &str) -> Self {
        Self {
            class,
            service: service.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectionParseError {
    #[error("expected `<class>:<service>`, got `{0}`")]
    Shape(String),
    #[error("unknown fault class `{0}`")]
    Class(String),
}

/// `<class>:<service>`.
impl FromStr for FaultInjection {
    type Err = InjectionParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (class, service) = s
            .split_once(':')
            .filter(|(c, v)| !c.is_empty() && !v.is_empty())
            .ok_or_else(|| InjectionParseError::Shape(s.to_string()))?;
        let class = FaultClass::ALL
            .into_iter()
            .find(|c| c.as_str() == class)
            .ok_or_else(|| InjectionParseError::Class(class.to_string()))?;
        Ok(Self::new(class, service))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunnerError {
    #[error("runner unavailable: {0}")]
    Unavailable(String),
    #[error("deploy failed: {0}")]
    Deploy(String),
}

/// Deploys an artifact set onto some host and reports what happened.
pub trait Runner {
    fn deploy(&mut self, artifacts: &ArtifactSet, profile: &HostProfile) -> Result<RunOutputs, RunnerError>;
    fn teardown(&mut self) -> Result<(), RunnerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierStatus {
    Pass,
    Fail,
    NotEvaluated,
}

impl TierStatus {
    fn from_bool(ok: bool) -> Self {
        if ok {
            TierStatus::Pass
        } else {
            TierStatus::Fail
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TierStatus::Pass => "✓",
            TierStatus::Fail => "✗",
            TierStatus::NotEvaluated => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierReport {
    pub t0: TierStatus,
    pub t1: TierStatus,
    pub t2: TierStatus,
    #[serde(default)]
    pub t0_findings: Vec<T0Finding>,
    #[serde(default)]
    pub failing_services: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runner_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<RunOutputs>,
}

impl TierReport {
    pub fn summary(&self) -> String {
        format!(
            "T0 {} T1 {} T2 {}",
            self.t0.symbol(),
            self.t1.symbol(),
            self.t2.symbol()
        )
    }

    pub fn passed(&self) -> bool {
        self.t2 == TierStatus::Pass
    }

    pub fn statuses(&self) -> [TierStatus; 3] {
        [self.t0, self.t1, self.t2]
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("tier report serializes")
    }
}

/// T0 on the artifacts; T1 only if T0 passed; T2 only if T1 passed.
pub fn run_tiers(artifacts: &ArtifactSet, runner: &mut dyn Runner, profile: &HostProfile) -> TierReport {
    let t0 = t0_check(artifacts);
    let mut report = TierReport {
        t0: TierStatus::from_bool(t0.pass()),
        t1: TierStatus::NotEvaluated,
        t2: TierStatus::NotEvaluated,
        t0_findings: t0.findings,
        failing_services: Vec::new(),
        runner_error: None,
        outputs: None,
    };
    if report.t0 != TierStatus::Pass {
        return report;
    }
    let outputs = match runner.deploy(artifacts, profile) {
        Ok(o) => o,
        Err(e) => {
            report.t1 = TierStatus::Fail;
            report.runner_error = Some(e.to_string());
            return report;
        }
    };
    report.failing_services = outputs.failing_services();
    report.t1 = TierStatus::from_bool(report.failing_services.is_empty());
    if report.t1 == TierStatus::Pass {
        let smoke = artifacts.smoke();
        let min_rows = smoke.as_ref().map_or(1, |s| s.min_rows);
        let max_lag = smoke.as_ref().map_or(i64::MAX, |s| s.max_lag_events);
        let s = &outputs.smoke_output;
        let ok = s.query_error.is_none()
            && s.rows_returned >= min_rows
            && s.lag_events.map_or(true, |l| l <= max_lag);
        report.t2 = TierStatus::from_bool(ok);
    }
    report.outputs = Some(outputs);
    report
}
