//! Fixed layout of a pipeline workdir. Commands only read and write here.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dds_core::attribution::{AttributionRecord, Outcome, RuntimeSignal};
use dds_core::harness::HostProfile;
use dds_core::operator::OperatorTypeRegistry;
use dds_core::skill::{load_catalog, write_lock, LineageEntry, SkillCatalog};

use crate::Failure;

pub const INTENT: &str = "intent.yaml";
pub const VALIDATION: &str = "validation.yaml";
pub const DAG: &str = "dag.yaml";
pub const DAG_VERDICT: &str = "dag_verdict.yaml";
pub const PLAN: &str = "plan.yaml";
pub const TRACE: &str = "trace.yaml";
pub const BRIEF: &str = "brief.yaml";
pub const ARTIFACTS: &str = "artifacts";
pub const RUN: &str = "runs/latest.yaml";
pub const TIERS: &str = "tiers.yaml";
pub const SIGNALS: &str = "signals.yaml";
pub const RECORDS: &str = "records.yaml";
pub const LOG: &str = "attribution.jsonl";
pub const PROFILE: &str = "profile.yaml";
pub const SKILLS: &str = "skills";
pub const LINEAGE: &str = "lineage.yaml";
pub const LOCK: &str = "skills.lock";
pub const STATE: &str = "state.yaml";

/// A routed record together with the signal it came from and what
/// happened to it; `patch` revisits the deferred ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entry {
    pub signal: RuntimeSignal,
    pub record: AttributionRecord,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct State {
    pub cycle: u32,
    #[serde(default)]
    pub seed: u64,
    /// Signals of the most recent cycle, for the fixed-count summary.
    #[serde(default)]
    pub last_signals: Vec<RuntimeSignal>,
}

pub struct Workdir {
    pub root: PathBuf,
}

impl Workdir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }

    pub fn require(&self, rel: &str) -> Result<PathBuf, Failure> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Failure::Missing(p.display().to_string()))
        }
    }

    pub fn read(&self, rel: &str) -> Result<String, Failure> {
        let p = self.require(rel)?;
        fs::read_to_string(&p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
    }

    pub fn load<T: DeserializeOwned>(&self, rel: &str) -> Result<T, Failure> {
        let text = self.read(rel)?;
        serde_yaml::from_str(&text).map_err(|e| Failure::Input(format!("{rel}: {e}")))
    }

    pub fn write(&self, rel: &str, text: &str) -> Result<(), Failure> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::Input(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
    }

    pub fn save<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), Failure> {
        self.write(rel, &serde_yaml::to_string(value).expect("document serializes"))
    }

    pub fn remove_dir(&self, rel: &str) {
        let _ = fs::remove_dir_all(self.path(rel));
    }

    pub fn state(&self) -> Result<State, Failure> {
        if self.exists(STATE) {
            self.load(STATE)
        } else {
            Ok(State::default())
        }
    }

    /// The workdir profile, or a clean host when none has been written.
    pub fn profile(&self) -> Result<HostProfile, Failure> {
        if self.exists(PROFILE) {
            self.load(PROFILE)
        } else {
            Ok(HostProfile::default())
        }
    }

    pub fn catalog(&self, registry: &OperatorTypeRegistry) -> Result<SkillCatalog, Failure> {
        let dir = self.require(SKILLS)?;
        let cat = load_catalog(&dir, registry).map_err(|e| Failure::Input(format!("{}: {e}", e.code())))?;
        let lineage: Vec<LineageEntry> = if self.exists(LINEAGE) { self.load(LINEAGE)? } else { Vec::new() };
        Ok(cat.with_lineage(lineage))
    }

    pub fn save_catalog(&self, catalog: &SkillCatalog) -> Result<(), Failure> {
        catalog
            .write_dir(&self.path(SKILLS))
            .map_err(|e| Failure::Input(format!("{SKILLS}: {e}")))?;
        self.save(LINEAGE, &catalog.lineage())?;
        self.write(LOCK, &write_lock(catalog))
    }

    /// Copies `.yaml` skill documents from `src` into the workdir.
    pub fn import_skills(&self, src: &Path) -> Result<(), Failure> {
        let entries = fs::read_dir(src).map_err(|_| Failure::Missing(src.display().to_string()))?;
        self.remove_dir(SKILLS);
        fs::create_dir_all(self.path(SKILLS)).map_err(|e| Failure::Input(e.to_string()))?;
        for entry in entries.flatten() {
            let p = entry.path();
            if p.extension().and_then(|e| e.to_str()) == Some("yaml") {
                let name = p.file_name().expect("file has a name");
                fs::copy(&p, self.path(SKILLS).join(name)).map_err(|e| Failure::Input(e.to_string()))?;
            }
        }
        let _ = fs::remove_file(self.path(LINEAGE));
        Ok(())
    }
}
