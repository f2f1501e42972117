//! Deterministic artifact generation from a physical plan: a compose
//! descriptor, per-store init scripts, producer manifests, and a smoke
//! spec, each skill-informed value preceded by a `# skill:` marker line.

mod generate;
mod t0;
pub mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::intent::IntentSpec;
use crate::planner::PhysicalPlan;

pub use generate::render;
pub use t0::{t0_check, T0Finding, T0Report, ALLOWED_SQL_KEYWORDS};

pub const COMPOSE_PATH: &str = "docker-compose.yml";
pub const SMOKE_PATH: &str = "smoke.yaml";
pub const CITATIONS_PATH: &str = "citations.yaml";
/// Marker prefix; SQL artifacts put it behind a `-- ` comment.
pub const MARKER: &str = "# skill:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Compose,
    InitScript,
    ProducerManifest,
    SmokeSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRequest {
    pub kind: ArtifactKind,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub tier: String,
    pub expectation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentBrief {
    pub artifacts_to_generate: Vec<ArtifactRequest>,
    pub citations_required: BTreeSet<String>,
    pub checks_to_pass: Vec<Check>,
}

impl DeploymentBrief {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("brief serializes")
    }
}

pub fn init_path(system: &str) -> String {
    format!("init/{system}.sql")
}

pub fn producer_path(name: &str) -> String {
    format!("producers/{name}.yaml")
}

/// Stores get an init script when their template set has one for the role
/// they are bound to.
pub fn build_brief(plan: &PhysicalPlan, _intent: &IntentSpec) -> DeploymentBrief {
    let templates = templates::SystemTemplates::default();
    let mut artifacts = vec![ArtifactRequest {
        kind: ArtifactKind::Compose,
        path: COMPOSE_PATH.into(),
    }];
    for system in plan.systems() {
        let has_init = plan.dag.nodes.iter().any(|n| {
            plan.system_of(&n.id) == Some(system)
                && templates.init_template(system, &n.role).is_some()
        });
        if has_init {
            artifacts.push(ArtifactRequest {
                kind: ArtifactKind::InitScript,
                path: init_path(system),
            });
        }
    }
    for n in plan.dag.ingest_nodes() {
        artifacts.push(ArtifactRequest {
            kind: ArtifactKind::ProducerManifest,
            path: producer_path(&n.id),
        });
    }
    artifacts.push(ArtifactRequest {
        kind: ArtifactKind::SmokeSpec,
        path: SMOKE_PATH.into(),
    });
    DeploymentBrief {
        artifacts_to_generate: artifacts,
        citations_required: plan.citations(),
        checks_to_pass: vec![
            Check {
                tier: "T0".into(),
                expectation: "every artifact is well-formed".into(),
            },
            Check {
                tier: "T1".into(),
                expectation: "every service boots and reports healthy".into(),
            },
            Check {
                tier: "T2".into(),
                expectation: "the smoke query returns at least the expected rows".into(),
            },
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CitationRef {
    pub artifact: String,
    /// 1-based line of the value the marker annotates.
    pub line: usize,
    pub citation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducerTarget {
    pub system: String,
    pub service: String,
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProducerManifest {
    pub name: String,
    pub runtime: String,
    pub image: String,
    pub template: String,
    pub targets: Vec<ProducerTarget>,
    pub rate_eps: i64,
    /// `runtime:package` imported by the template.
    pub requires: Vec<String>,
    /// `runtime:package` installed because a skill declared it.
    pub packages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmokeTarget {
    pub service: String,
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmokeSpec {
    pub target: SmokeTarget,
    pub query: String,
    pub min_rows: i64,
    pub priming_delay_s: u32,
    pub ingest_rate_eps: f64,
    /// Worst bottleneck over the plan's ingest-to-terminal paths.
    pub path_capacity_eps: f64,
    pub max_lag_events: i64,
}

/// Everything a runner needs; texts are exactly what is written to disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactSet {
    pub compose: String,
    /// Store system -> DDL.
    pub init_scripts: BTreeMap<String, String>,
    /// Producer name -> manifest document.
    pub producer_manifests: BTreeMap<String, String>,
    pub smoke_spec: String,
    pub citation_index: Vec<CitationRef>,
    /// Compose service -> system it runs.
    pub services: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    services: BTreeMap<String, String>,
    citations: Vec<CitationRef>,
}

impl ArtifactSet {
    /// `(relative path, text)` for every file, sidecar included.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![(COMPOSE_PATH.to_string(), self.compose.clone())];
        for (s, t) in &self.init_scripts {
            out.push((init_path(s), t.clone()));
        }
        for (n, t) in &self.producer_manifests {
            out.push((producer_path(n), t.clone()));
        }
        out.push((SMOKE_PATH.to_string(), self.smoke_spec.clone()));
        let sidecar = Sidecar {
            services: self.services.clone(),
            citations: self.citation_index.clone(),
        };
        out.push((
            CITATIONS_PATH.to_string(),
            serde_yaml::to_string(&sidecar).expect("sidecar serializes"),
        ));
        out
    }

    pub fn text_of(&self, path: &str) -> Option<&str> {
        if path == COMPOSE_PATH {
            return Some(&self.compose);
        }
        if path == SMOKE_PATH {
            return Some(&self.smoke_spec);
        }
        if let Some(s) = path.strip_prefix("init/").and_then(|p| p.strip_suffix(".sql")) {
            return self.init_scripts.get(s).map(String::as_str);
        }
        let n = path.strip_prefix("producers/")?.strip_suffix(".yaml")?;
        self.producer_manifests.get(n).map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        for (rel, text) in self.files() {
            let p = dir.join(rel);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, text)?;
        }
        Ok(())
    }

    pub fn read_from(dir: &Path) -> io::Result<Self> {
        let read = |rel: &str| fs::read_to_string(dir.join(rel));
        let sidecar: Sidecar = serde_yaml::from_str(&read(CITATIONS_PATH)?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let listing = |sub: &str, ext: &str| -> io::Result<BTreeMap<String, String>> {
            let mut out = BTreeMap::new();
            let d = dir.join(sub);
            if !d.is_dir() {
                return Ok(out);
            }
            for entry in fs::read_dir(d)? {
                let p = entry?.path();
                if p.extension().and_then(|e| e.to_str()) == Some(ext) {
                    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
                    out.insert(stem.to_string(), fs::read_to_string(&p)?);
                }
            }
            Ok(out)
        };
        Ok(Self {
            compose: read(COMPOSE_PATH)?,
            init_scripts: listing("init", "sql")?,
            producer_manifests: listing("producers", "yaml")?,
            smoke_spec: read(SMOKE_PATH)?,
            citation_index: sidecar.citations,
            services: sidecar.services,
        })
    }

    /// Citations found inline, by scanning every artifact for marker lines.
    pub fn inline_citations(&self) -> Vec<CitationRef> {
        let mut out = Vec::new();
        for (path, text) in self.files() {
            if path == CITATIONS_PATH {
                continue;
            }
            for (i, line) in text.lines().enumerate() {
                if let Some(c) = marker_in(line) {
                    out.push(CitationRef {
                        artifact: path.clone(),
                        line: i + 2,
                        citation: c.to_string(),
                    });
                }
            }
        }
        out
    }

    pub fn cites(&self, citation: &str) -> bool {
        self.citation_index.iter().any(|c| c.citation == citation)
    }

    pub fn smoke(&self) -> Option<SmokeSpec> {
        serde_yaml::from_str(&self.smoke_spec).ok()
    }

    pub fn manifest(&self, name: &str) -> Option<ProducerManifest> {
        serde_yaml::from_str(self.producer_manifests.get(name)?).ok()
    }
}

/// The citation carried by a marker line, if `line` is one.
pub fn marker_in(line: &str) -> Option<&str> {
    let t = line.trim_start();
    let t = t.strip_prefix("-- ").unwrap_or(t);
    t.strip_prefix(MARKER).map(str::trim)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no template for system `{system}` in role `{role}`")]
    TemplateGap { system: String, role: String },
    #[error("template `{template}` left holes unfilled: {holes:?}")]
    UnfilledHoles { template: String, holes: Vec<String> },
    #[error("marker `{0}` does not resolve in the loaded catalog")]
    DanglingCitation(String),
    #[error("inline markers differ from the brief (missing {missing:?}, unexpected {unexpected:?})")]
    CitationMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
}

impl RenderError {
    pub fn code(&self) -> &'static str {
        match self {
            RenderError::TemplateGap { .. } => "TEMPLATE_GAP",
            RenderError::UnfilledHoles { .. } => "UNFILLED_HOLES",
            RenderError::DanglingCitation(_) => "DANGLING_CITATION",
            RenderError::CitationMismatch { .. } => "CITATION_MISMATCH",
        }
    }
}
