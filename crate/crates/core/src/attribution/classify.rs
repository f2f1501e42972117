use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::harness::{RunOutputs, TierReport, TierStatus};
use crate::intent::ValidationReport;

const RULES: &str = include_str!("../../config/classifier.yaml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalClass {
    InfeasibleIntent,
    PatternSloMismatch,
    CompositionGapImage,
    CompositionGapLibrary,
    CompositionGapDdl,
    CodegenSlip,
    HostEnvMismatch,
    AcceptanceFailureGeneric,
}

impl SignalClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalClass::InfeasibleIntent => "infeasible_intent",
            SignalClass::PatternSloMismatch => "pattern_slo_mismatch",
            SignalClass::CompositionGapImage => "composition_gap_image",
            SignalClass::CompositionGapLibrary => "composition_gap_library",
            SignalClass::CompositionGapDdl => "composition_gap_ddl",
            SignalClass::CodegenSlip => "codegen_slip",
            SignalClass::HostEnvMismatch => "host_env_mismatch",
            SignalClass::AcceptanceFailureGeneric => "acceptance_failure_generic",
        }
    }
}

impl fmt::Display for SignalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalSource {
    ComposeStderr,
    ExitCode,
    HealthState,
    ContainerLog,
    SmokeOutput,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeSignal {
    pub id: String,
    pub class: SignalClass,
    pub source: SignalSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<String>,
    /// Named captures plus `raw`, the text the rule matched against.
    pub payload: BTreeMap<String, String>,
}

impl RuntimeSignal {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).map(String::as_str)
    }

    /// Identity across cycles: the same fault on the same service.
    pub fn key(&self) -> (SignalClass, Option<String>) {
        (self.class, self.service.clone())
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RuleDoc {
    source: SignalSource,
    class: SignalClass,
    pattern: String,
}

#[derive(Debug, Clone)]
pub struct ClassifierRule {
    pub source: SignalSource,
    pub class: SignalClass,
    pub pattern: Regex,
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub rules: Vec<ClassifierRule>,
    pub lag_threshold: i64,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("classifier rules: {0}")]
    Syntax(#[from] serde_yaml::Error),
    #[error("rule {index}: {source}")]
    Pattern {
        index: usize,
        #[source]
        source: regex::Error,
    },
}

impl Default for Classifier {
    fn default() -> Self {
        Self::from_yaml(RULES).expect("embedded classifier rules are valid")
    }
}

struct Draft {
    class: SignalClass,
    source: SignalSource,
    service: Option<String>,
    payload: BTreeMap<String, String>,
}

impl Classifier {
    pub fn from_yaml(doc: &str) -> Result<Self, ClassifierError> {
        #[derive(Deserialize)]
        struct Doc {
            rules: Vec<RuleDoc>,
            lag_threshold: i64,
        }
        let d: Doc = serde_yaml::from_str(doc)?;
        let rules = d
            .rules
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                Ok(ClassifierRule {
                    source: r.source,
                    class: r.class,
                    pattern: Regex::new(&r.pattern).map_err(|source| ClassifierError::Pattern { index, source })?,
                })
            })
            .collect::<Result<_, ClassifierError>>()?;
        Ok(Self {
            rules,
            lag_threshold: d.lag_threshold,
        })
    }

    fn match_line(&self, source: SignalSource, line: &str) -> Option<(SignalClass, BTreeMap<String, String>)> {
        self.rules.iter().filter(|r| r.source == source).find_map(|r| {
            let caps = r.pattern.captures(line)?;
            let mut payload: BTreeMap<String, String> = r
                .pattern
                .capture_names()
                .flatten()
                .filter_map(|n| Some((n.to_string(), caps.name(n)?.as_str().to_string())))
                .collect();
            payload.insert("raw".into(), line.to_string());
            Some((r.class, payload))
        })
    }

    /// Signals from a finished tier run. T0 findings feed the `validation`
    /// source; everything else comes from the attached run outputs.
    pub fn classify_report(&self, report: &TierReport) -> Vec<RuntimeSignal> {
        let mut drafts = Vec::new();
        for f in &report.t0_findings {
            let line = format!("{} {}: {}", f.code, f.artifact, f.detail);
            let (class, mut payload) = self
                .match_line(SignalSource::Validation, &line)
                .unwrap_or((SignalClass::AcceptanceFailureGeneric, BTreeMap::from([("raw".into(), line)])));
            payload.insert("artifact".into(), f.artifact.clone());
            drafts.push(Draft {
                class,
                source: SignalSource::Validation,
                service: None,
                payload,
            });
        }
        if let Some(err) = &report.runner_error {
            drafts.push(Draft {
                class: SignalClass::AcceptanceFailureGeneric,
                source: SignalSource::ExitCode,
                service: None,
                payload: BTreeMap::from([
                    ("raw".into(), err.clone()),
                    ("code".into(), "RUNNER_ERROR".into()),
                ]),
            });
        }
        if let Some(out) = &report.outputs {
            drafts.extend(self.drafts(out, report.t2 == TierStatus::Fail));
        }
        finish(drafts)
    }

    /// Signals from intent validation: hard errors the rules recognise.
    pub fn classify_validation(&self, report: &ValidationReport) -> Vec<RuntimeSignal> {
        let drafts = report
            .hard_errors
            .iter()
            .filter_map(|f| {
                let line = format!("{}: {}", f.code, f.message);
                let (class, mut payload) = self.match_line(SignalSource::Validation, &line)?;
                payload.insert("dimension".into(), f.dimension.clone());
                Some(Draft {
                    class,
                    source: SignalSource::Validation,
                    service: None,
                    payload,
                })
            })
            .collect();
        finish(drafts)
    }

    /// Signals from run outputs alone; an unhealthy service or a failed
    /// smoke with no matching rule becomes a generic signal.
    pub fn classify(&self, outputs: &RunOutputs) -> Vec<RuntimeSignal> {
        let smoke_failed = outputs.smoke_output.query_error.is_some() || outputs.smoke_output.rows_returned < 1;
        let failing = !outputs.failing_services().is_empty();
        finish(self.drafts(outputs, smoke_failed && !failing))
    }

    fn drafts(&self, out: &RunOutputs, smoke_failed: bool) -> Vec<Draft> {
        let mut drafts = Vec::new();
        for line in out.compose_stderr.lines().filter(|l| !l.trim().is_empty()) {
            if let Some((class, payload)) = self.match_line(SignalSource::ComposeStderr, line) {
                let service = payload
                    .get("service")
                    .cloned()
                    .or_else(|| mentioned_service(line, out.container_states.keys()));
                drafts.push(Draft {
                    class,
                    source: SignalSource::ComposeStderr,
                    service,
                    payload,
                });
            }
        }
        for (svc, log) in &out.container_logs {
            for line in log.lines() {
                if let Some((class, payload)) = self.match_line(SignalSource::ContainerLog, line) {
                    drafts.push(Draft {
                        class,
                        source: SignalSource::ContainerLog,
                        service: Some(svc.clone()),
                        payload,
                    });
                }
            }
        }

        let explained: BTreeSet<String> = drafts.iter().filter_map(|d| d.service.clone()).collect();
        let anonymous = drafts.iter().any(|d| d.service.is_none());
        for (svc, state) in &out.container_states {
            if state.ok() || explained.contains(svc) || anonymous {
                continue;
            }
            let log = out.container_logs.get(svc).cloned().unwrap_or_default();
            let (source, raw) = if state.exit_code != 0 {
                (SignalSource::ExitCode, format!("exit {}: {log}", state.exit_code))
            } else {
                (SignalSource::HealthState, format!("{:?}: {log}", state.health))
            };
            drafts.push(Draft {
                class: SignalClass::AcceptanceFailureGeneric,
                source,
                service: Some(svc.clone()),
                payload: BTreeMap::from([("raw".into(), raw.trim_end().to_string())]),
            });
        }

        let smoke = &out.smoke_output;
        if let Some(lag) = smoke.lag_events.filter(|l| *l > self.lag_threshold) {
            drafts.push(Draft {
                class: SignalClass::PatternSloMismatch,
                source: SignalSource::SmokeOutput,
                service: None,
                payload: BTreeMap::from([
                    ("raw".into(), format!("lag_events={lag}")),
                    ("lag_events".into(), lag.to_string()),
                    ("threshold".into(), self.lag_threshold.to_string()),
                ]),
            });
        } else if smoke_failed && drafts.is_empty() {
            let raw = smoke
                .query_error
                .clone()
                .unwrap_or_else(|| format!("rows_returned={}", smoke.rows_returned));
            drafts.push(Draft {
                class: SignalClass::AcceptanceFailureGeneric,
                source: SignalSource::SmokeOutput,
                service: None,
                payload: BTreeMap::from([("raw".into(), raw)]),
            });
        }
        drafts
    }
}

fn mentioned_service<'a>(line: &str, mut services: impl Iterator<Item = &'a String>) -> Option<String> {
    services.find(|s| line.contains(s.as_str())).cloned()
}

/// Keeps the first draft per (class, service) and numbers them.
fn finish(drafts: Vec<Draft>) -> Vec<RuntimeSignal> {
    let mut seen = BTreeSet::new();
    drafts
        .into_iter()
        .filter(|d| seen.insert((d.class, d.service.clone())))
        .enumerate()
        .map(|(i, d)| RuntimeSignal {
            id: format!("s{}", i + 1),
            class: d.class,
            source: d.source,
            service: d.service,
            payload: d.payload,
        })
        .collect()
}
