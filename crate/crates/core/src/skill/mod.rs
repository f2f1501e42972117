//! Per-system skill documents: capabilities, compositions, anti-patterns,
//! and operational knowledge, plus matching, patching, and locking.

mod catalog;
mod compose;
pub mod ddl;
mod lock;
mod matcher;
mod patch;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::consistency::ConsistencyLevel;
use crate::fieldpath::FieldPath;
use crate::intent::ConditionOp;
use crate::operator::{Delivery, OperatorType};

pub use catalog::{load_catalog, Ablation, LineageEntry, LoadWarning, SkillCatalog, SkillLoadError};
pub use compose::{check_composition, CompositionVerdict};
pub use lock::{canonical_json, sha256_hex, write_lock, LockEntry, LockFile};
pub use matcher::{match_anti_patterns, AntiPatternMatch, BindingContext, MatchContext};
pub use patch::{apply_patch, PatchError, PatchOp, Provenance, SkillPatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skill {
    pub system: String,
    pub version: String,
    pub operator_types: Vec<OperatorType>,
    pub capabilities: Capabilities,
    pub compositions: Vec<Composition>,
    pub anti_patterns: Vec<AntiPattern>,
    pub operational: Operational,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capabilities {
    #[serde(default)]
    pub data_models: Vec<String>,
    #[serde(default)]
    pub access_patterns: Vec<String>,
    /// Free-text claim such as `"500K inserts/sec per node"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_throughput: Option<String>,
    #[serde(default)]
    pub consistency: Vec<ConsistencyLevel>,
    #[serde(default)]
    pub monthly_usd_estimate: f64,
}

impl Capabilities {
    /// Events per second parsed from the leading number of `max_throughput`
    /// (`K`/`M` suffixes understood). `None` when nothing numeric leads.
    pub fn max_throughput_eps(&self) -> Option<f64> {
        parse_throughput(self.max_throughput.as_deref()?)
    }
}

fn parse_throughput(text: &str) -> Option<f64> {
    let t = text.trim_start();
    let end = t
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == '_' || c == ','))
        .unwrap_or(t.len());
    let digits: String = t[..end].chars().filter(|c| *c != '_' && *c != ',').collect();
    let base: f64 = digits.parse().ok()?;
    let mult = match t[end..].trim_start().chars().next() {
        Some('k' | 'K') => 1e3,
        Some('m' | 'M') => 1e6,
        Some('g' | 'G' | 'b' | 'B') => 1e9,
        _ => 1.0,
    };
    Some(base * mult)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Inbound,
    Outbound,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Composition {
    pub with: String,
    pub connector: String,
    pub direction: Direction,
    pub semantics: Delivery,
    #[serde(default)]
    pub known_issues: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    HardLimit,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntiPattern {
    pub scenario: String,
    pub reason: String,
    pub alternative: String,
    pub severity: Severity,
    #[serde(default)]
    pub matchers: Vec<Matcher>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Matcher {
    /// Forbidden versions: `from <= v < until`, either bound optional.
    VersionRange {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        from: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        until: Option<String>,
    },
    /// A clause applied directly to a column of this type, e.g. TTL on
    /// DateTime64.
    ColumnType { column_type: String, clause: String },
    /// A binding of this system to a node that serves or writes the pattern.
    OperatorPairing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        op_type: Option<OperatorType>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        role: Option<String>,
        access_pattern: String,
    },
    ConfigPredicate {
        path: FieldPath,
        op: ConditionOp,
        value: serde_json::Value,
    },
}

impl Matcher {
    pub fn kind(&self) -> &'static str {
        match self {
            Matcher::VersionRange { .. } => "version_range",
            Matcher::ColumnType { .. } => "column_type",
            Matcher::OperatorPairing { .. } => "operator_pairing",
            Matcher::ConfigPredicate { .. } => "config_predicate",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Operational {
    #[serde(default)]
    pub recommended_images: Vec<String>,
    #[serde(default)]
    pub known_host_port_conflicts: Vec<PortConflict>,
    #[serde(default, alias = "required_python_extras")]
    pub required_client_libraries: Vec<ClientLibrary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortConflict {
    pub port: u16,
    pub remap_to: u16,
    #[serde(default)]
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ClientLibrary {
    pub runtime: String,
    pub package: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<String>,
}

impl ClientLibrary {
    pub fn python(package: &str) -> Self {
        Self {
            runtime: "python".into(),
            package: package.into(),
            extras: Vec::new(),
        }
    }

    /// Parses `pkg` or `pkg[extra1,extra2]` as a python requirement.
    pub fn parse_python(spec: &str) -> Self {
        let spec = spec.trim();
        match spec.split_once('[') {
            Some((pkg, rest)) => Self {
                runtime: "python".into(),
                package: pkg.trim().into(),
                extras: rest
                    .trim_end_matches(']')
                    .split(',')
                    .map(|e| e.trim().to_string())
                    .filter(|e| !e.is_empty())
                    .collect(),
            },
            None => Self::python(spec),
        }
    }
}

impl fmt::Display for ClientLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.runtime, self.package)?;
        if !self.extras.is_empty() {
            write!(f, "[{}]", self.extras.join(","))?;
        }
        Ok(())
    }
}

// Entries under the `required_python_extras` alias are bare requirement
// strings; the general form is a mapping.
impl<'de> Deserialize<'de> for ClientLibrary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Full {
            runtime: String,
            package: String,
            #[serde(default)]
            extras: Vec<String>,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Spec(String),
            Full(Full),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Spec(s) => ClientLibrary::parse_python(&s),
            Repr::Full(f) => ClientLibrary {
                runtime: f.runtime,
                package: f.package,
                extras: f.extras,
            },
        })
    }
}

impl Skill {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        #[derive(Deserialize)]
        struct Doc {
            skill: Skill,
        }
        serde_yaml::from_str::<Doc>(doc).map(|d| d.skill)
    }

    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            skill: &'a Skill,
        }
        serde_yaml::to_string(&Doc { skill: self }).expect("skill serializes")
    }

    pub fn fills(&self, op_type: &OperatorType) -> bool {
        self.operator_types.contains(op_type)
    }

    /// The composition entry this skill declares toward `other`, if any.
    pub fn composition_with(&self, other: &str) -> Option<(usize, &Composition)> {
        self.compositions
            .iter()
            .enumerate()
            .find(|(_, c)| c.with == other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throughput_claims() {
        assert_eq!(parse_throughput("500K inserts/sec per node"), Some(500_000.0));
        assert_eq!(parse_throughput("1.5M msgs/s"), Some(1_500_000.0));
        assert_eq!(parse_throughput("10,000 ops/sec"), Some(10_000.0));
        assert_eq!(parse_throughput("high"), None);
    }

    #[test]
    fn python_extras_alias() {
        let op: Operational =
            serde_yaml::from_str("required_python_extras: [\"confluent-kafka[avro]\"]").unwrap();
        assert_eq!(
            op.required_client_libraries,
            vec![ClientLibrary {
                runtime: "python".into(),
                package: "confluent-kafka".into(),
                extras: vec!["avro".into()],
            }]
        );
    }
}
