use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::Value as Yaml;
use thiserror::Error;

use super::lock::sha256_hex;
use super::{Operational, Severity, Skill};
use crate::fieldpath::FieldPath;
use crate::operator::OperatorTypeRegistry;

#[derive(Debug, Error)]
pub enum SkillLoadError {
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: malformed document: {message}")]
    Syntax { file: String, message: String },
    #[error("{file}: required block `{block}` is missing")]
    BlockMissing { file: String, block: String },
    #[error("{file}: {path}: {message}")]
    Schema {
        file: String,
        path: String,
        message: String,
    },
    #[error("{file}: operator type `{op_type}` is not registered")]
    UnknownOperatorType { file: String, op_type: String },
    #[error("system `{system}` is defined by both {first} and {second}")]
    DuplicateSystem {
        system: String,
        first: String,
        second: String,
    },
}

impl SkillLoadError {
    pub fn code(&self) -> String {
        match self {
            SkillLoadError::Io { .. } => "IO_ERROR".into(),
            SkillLoadError::Syntax { .. } => "SKILL_SYNTAX".into(),
            SkillLoadError::BlockMissing { block, .. } => {
                format!("{}_BLOCK_MISSING", block.to_ascii_uppercase())
            }
            SkillLoadError::Schema { .. } => "SKILL_SCHEMA".into(),
            SkillLoadError::UnknownOperatorType { .. } => "UNKNOWN_OPERATOR_TYPE".into(),
            SkillLoadError::DuplicateSystem { .. } => "DUPLICATE_SYSTEM".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarning {
    pub file: String,
    pub path: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub timestamp: String,
    pub skill: String,
    pub field_path: String,
    pub patch_id: String,
    pub signal_id: String,
}

/// Skill-block ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Full,
    /// Operational and anti-pattern blocks emptied.
    OpsStripped,
    /// Capabilities only.
    Minimal,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillCatalog {
    skills: BTreeMap<String, Skill>,
    files: BTreeMap<String, String>,
    lineage: Vec<LineageEntry>,
    warnings: Vec<LoadWarning>,
}

const BLOCKS: [&str; 4] = ["capabilities", "compositions", "anti_patterns", "operational"];

/// Loads every `*.yaml`/`*.yml` file in `dir` (sorted by name).
pub fn load_catalog(dir: &Path, registry: &OperatorTypeRegistry) -> Result<SkillCatalog, SkillLoadError> {
    let io = |source| SkillLoadError::Io {
        file: dir.to_path_buf(),
        source,
    };
    let mut docs = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(p.extension().and_then(|e| e.to_str()), Some("yaml" | "yml"))
        })
        .collect();
    entries.sort();
    for p in entries {
        let text = fs::read_to_string(&p).map_err(|source| SkillLoadError::Io {
            file: p.clone(),
            source,
        })?;
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        docs.push((name, text));
    }
    SkillCatalog::from_documents(docs, registry)
}

/// Parses one skill document, checking the four-block shape first so a
/// missing block gets its own code rather than a generic serde message.
pub fn parse_skill(file: &str, text: &str) -> Result<(Skill, Vec<LoadWarning>), SkillLoadError> {
    let root: Yaml = serde_yaml::from_str(text).map_err(|e| SkillLoadError::Syntax {
        file: file.into(),
        message: e.to_string(),
    })?;
    let Some(mut body) = root.get("skill").cloned() else {
        return Err(SkillLoadError::Schema {
            file: file.into(),
            path: "skill".into(),
            message: "top-level key `skill` is required".into(),
        });
    };
    let map = body.as_mapping_mut().ok_or_else(|| SkillLoadError::Schema {
        file: file.into(),
        path: "skill".into(),
        message: "expected a mapping".into(),
    })?;
    for block in BLOCKS {
        let key = Yaml::from(block);
        let Some(v) = map.get_mut(&key) else {
            return Err(SkillLoadError::BlockMissing {
                file: file.into(),
                block: block.into(),
            });
        };
        // An empty block may be written as `~`, `[]`, or `{}`.
        let is_list = matches!(block, "compositions" | "anti_patterns");
        let empty = v.is_null()
            || v.as_sequence().is_some_and(|s| s.is_empty())
            || v.as_mapping().is_some_and(|m| m.is_empty());
        if empty {
            *v = if is_list {
                Yaml::Sequence(Vec::new())
            } else {
                Yaml::Mapping(Default::default())
            };
        }
    }
    let skill: Skill = serde_yaml::from_value(body).map_err(|e| {
        let message = e.to_string();
        let path = message
            .split_once(": ")
            .filter(|(p, _)| !p.contains(' '))
            .map(|(p, _)| format!("skill.{p}"))
            .unwrap_or_else(|| "skill".into());
        SkillLoadError::Schema {
            file: file.into(),
            path,
            message,
        }
    })?;
    let warnings = skill
        .anti_patterns
        .iter()
        .enumerate()
        .filter(|(_, ap)| ap.severity == Severity::HardLimit && ap.matchers.is_empty())
        .map(|(i, ap)| LoadWarning {
            file: file.into(),
            path: format!("anti_patterns[{i}]"),
            code: "UNENFORCEABLE_HARD_LIMIT".into(),
            message: format!("hard_limit `{}` has no matchers and cannot fire", ap.scenario),
        })
        .collect();
    Ok((skill, warnings))
}

impl SkillCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(file name, text)` pairs; file names are only used for messages and
    /// the lock file.
    pub fn from_documents(
        docs: impl IntoIterator<Item = (String, String)>,
        registry: &OperatorTypeRegistry,
    ) -> Result<Self, SkillLoadError> {
        let mut cat = Self::default();
        for (file, text) in docs {
            let (skill, warnings) = parse_skill(&file, &text)?;
            if let Some(t) = skill.operator_types.iter().find(|t| !registry.contains(t)) {
                return Err(SkillLoadError::UnknownOperatorType {
                    file,
                    op_type: t.to_string(),
                });
            }
            if let Some(first) = cat.files.get(&skill.system) {
                return Err(SkillLoadError::DuplicateSystem {
                    system: skill.system.clone(),
                    first: first.clone(),
                    second: file,
                });
            }
            cat.warnings.extend(warnings);
            cat.files.insert(skill.system.clone(), file);
            cat.skills.insert(skill.system.clone(), skill);
        }
        Ok(cat)
    }

    pub fn from_skills(skills: impl IntoIterator<Item = Skill>) -> Self {
        let mut cat = Self::default();
        for s in skills {
            cat.insert(s);
        }
        cat
    }

    /// Adds or replaces a skill.
    pub fn insert(&mut self, skill: Skill) {
        self.files
            .entry(skill.system.clone())
            .or_insert_with(|| format!("{}.yaml", skill.system));
        self.skills.insert(skill.system.clone(), skill);
    }

    pub fn get(&self, system: &str) -> Option<&Skill> {
        self.skills.get(system)
    }

    pub(crate) fn get_mut(&mut self, system: &str) -> Option<&mut Skill> {
        self.skills.get_mut(system)
    }

    /// Skills in system-name order.
    pub fn skills(&self) -> impl Iterator<Item = &Skill> {
        self.skills.values()
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn file_of(&self, system: &str) -> String {
        self.files
            .get(system)
            .cloned()
            .unwrap_or_else(|| format!("{system}.yaml"))
    }

    pub fn warnings(&self) -> &[LoadWarning] {
        &self.warnings
    }

    pub fn lineage(&self) -> &[LineageEntry] {
        &self.lineage
    }

    pub fn with_lineage(mut self, lineage: Vec<LineageEntry>) -> Self {
        self.lineage = lineage;
        self
    }

    pub(crate) fn push_lineage(&mut self, entry: LineageEntry) {
        self.lineage.push(entry);
    }

    /// Hash over `(system, skill hash)` pairs in system order; the hash of
    /// empty input for an empty catalog.
    pub fn lock_hash(&self) -> String {
        let mut buf = String::new();
        for s in self.skills.values() {
            buf.push_str(&s.system);
            buf.push(':');
            buf.push_str(&s.content_hash());
            buf.push('\n');
        }
        sha256_hex(buf)
    }

    /// Resolves a citation such as `kafka.operational.recommended_images[0]`.
    pub fn resolve(&self, citation: &str) -> Option<serde_json::Value> {
        let (system, rest) = citation.split_once('.')?;
        let skill = self.skills.get(system)?;
        let path: FieldPath = rest.parse().ok()?;
        let doc = serde_json::to_value(skill).ok()?;
        path.resolve(&doc).cloned()
    }

    pub fn ablate(&self, variant: Ablation) -> Self {
        let mut out = self.clone();
        for s in out.skills.values_mut() {
            match variant {
                Ablation::Full => {}
                Ablation::OpsStripped => {
                    s.operational = Operational::default();
                    s.anti_patterns.clear();
                }
                Ablation::Minimal => {
                    s.operational = Operational::default();
                    s.anti_patterns.clear();
                    s.compositions.clear();
                }
            }
        }
        out
    }

    /// Writes one file per skill (named as loaded) into `dir`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for s in self.skills.values() {
            fs::write(dir.join(self.file_of(&s.system)), s.to_yaml())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "skill:
  system: redis
  version: \"7.2\"
  operator_types: [CACHE]
  capabilities: {data_models: [key_value], access_patterns: [point_lookup], consistency: [eventual]}
  compositions: []
  anti_patterns: []
  operational: {}
";

    #[test]
    fn missing_operational_block() {
        let doc = BASE.replace("  operational: {}\n", "");
        let err = parse_skill("redis.yaml", &doc).unwrap_err();
        assert_eq!(err.code(), "OPERATIONAL_BLOCK_MISSING");
    }

    #[test]
    fn null_blocks_are_empty() {
        let doc = BASE.replace("compositions: []", "compositions:");
        let (s, _) = parse_skill("redis.yaml", &doc).unwrap();
        assert!(s.compositions.is_empty());
    }

    #[test]
    fn unmatched_hard_limit_warns() {
        let doc = BASE.replace(
            "anti_patterns: []",
            "anti_patterns:\n    - {scenario: s, reason: r, alternative: a, severity: hard_limit}",
        );
        let (_, w) = parse_skill("redis.yaml", &doc).unwrap();
        assert_eq!(w[0].code, "UNENFORCEABLE_HARD_LIMIT");
    }

    #[test]
    fn duplicate_system() {
        let r = OperatorTypeRegistry::new();
        let err = SkillCatalog::from_documents(
            [("a.yaml".to_string(), BASE.to_string()), ("b.yaml".to_string(), BASE.to_string())],
            &r,
        )
        .unwrap_err();
        assert_eq!(err.code(), "DUPLICATE_SYSTEM");
    }

    #[test]
    fn unregistered_operator_type() {
        let doc = BASE.replace("[CACHE]", "[INDEX]");
        let err = SkillCatalog::from_documents([("r.yaml".into(), doc)], &OperatorTypeRegistry::new())
            .unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_OPERATOR_TYPE");
    }
}
