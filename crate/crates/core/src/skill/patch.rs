use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::lock::{canonical_json, sha256_hex};
use super::{LineageEntry, Skill, SkillCatalog};
use crate::clock::Clock;
use crate::fieldpath::{FieldPath, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchOp {
    /// Append to a list unless a structurally equal entry exists. A missing
    /// list under an existing mapping is created.
    AddEntry,
    SetValue,
    /// Remove entries equal to `value`, or the addressed element when
    /// `value` is null.
    RemoveEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub signal_id: String,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillPatch {
    pub target: String,
    pub path: FieldPath,
    pub op: PatchOp,
    #[serde(default)]
    pub value: Value,
    #[serde(default)]
    pub provenance: Provenance,
}

impl SkillPatch {
    /// Content id over target, path, op, and value. Provenance is excluded
    /// so the same fix proposed twice is recognised as one patch.
    pub fn id(&self) -> String {
        let body = json!({
            "target": self.target,
            "path": self.path.to_string(),
            "op": self.op,
            "value": self.value,
        });
        format!("p-{}", &sha256_hex(canonical_json(&body))[..16])
    }

    /// Citation-style path, e.g. `kafka.operational.recommended_images`.
    pub fn field(&self) -> String {
        format!("{}.{}", self.target, self.path)
    }

    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("patch serializes")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PatchError {
    #[error("no skill named `{0}`")]
    UnknownSkill(String),
    #[error("path `{path}` does not resolve in skill `{skill}`")]
    Unresolvable { skill: String, path: String },
    #[error("patch on `{path}` leaves skill `{skill}` ill-typed: {message}")]
    TypeMismatch {
        skill: String,
        path: String,
        message: String,
    },
}

impl PatchError {
    pub fn code(&self) -> &'static str {
        match self {
            PatchError::UnknownSkill(_) => "UNKNOWN_SKILL",
            PatchError::Unresolvable { .. } => "UNRESOLVABLE_PATH",
            PatchError::TypeMismatch { .. } => "TYPE_MISMATCH",
        }
    }
}

/// Returns the patched catalog. Re-applying a patch is a no-op on content
/// and never duplicates its lineage entry.
pub fn apply_patch(
    catalog: &SkillCatalog,
    patch: &SkillPatch,
    clock: &dyn Clock,
) -> Result<SkillCatalog, PatchError> {
    let skill = catalog
        .get(&patch.target)
        .ok_or_else(|| PatchError::UnknownSkill(patch.target.clone()))?;
    let unresolvable = || PatchError::Unresolvable {
        skill: patch.target.clone(),
        path: patch.path.to_string(),
    };
    let mismatch = |message: String| PatchError::TypeMismatch {
        skill: patch.target.clone(),
        path: patch.path.to_string(),
        message,
    };

    let mut doc = serde_json::to_value(skill).expect("skill serializes");
    match patch.op {
        PatchOp::AddEntry => match patch.path.resolve_mut(&mut doc) {
            Some(Value::Array(items)) => {
                if !items.contains(&patch.value) {
                    items.push(patch.value.clone());
                }
            }
            Some(_) => return Err(mismatch("add_entry target is not a list".into())),
            None => {
                let (parent, key) = split_last_key(&patch.path).ok_or_else(unresolvable)?;
                match parent.resolve_mut(&mut doc) {
                    Some(Value::Object(map)) => {
                        map.insert(key, Value::Array(vec![patch.value.clone()]));
                    }
                    _ => return Err(unresolvable()),
                }
            }
        },
        PatchOp::SetValue => match patch.path.resolve_mut(&mut doc) {
            Some(slot) => *slot = patch.value.clone(),
            None => {
                let (parent, key) = split_last_key(&patch.path).ok_or_else(unresolvable)?;
                match parent.resolve_mut(&mut doc) {
                    Some(Value::Object(map)) => {
                        map.insert(key, patch.value.clone());
                    }
                    _ => return Err(unresolvable()),
                }
            }
        },
        PatchOp::RemoveEntry if !patch.value.is_null() => {
            match patch.path.resolve_mut(&mut doc) {
                Some(Value::Array(items)) => items.retain(|v| *v != patch.value),
                Some(_) => return Err(mismatch("remove_entry target is not a list".into())),
                None => return Err(unresolvable()),
            }
        }
        PatchOp::RemoveEntry => {
            patch.path.resolve(&doc).ok_or_else(unresolvable)?;
            let parent = patch.path.parent().ok_or_else(unresolvable)?;
            match (parent.resolve_mut(&mut doc), patch.path.segments().last()) {
                (Some(Value::Array(items)), Some(Segment::Index(i))) => {
                    items.remove(*i);
                }
                (Some(Value::Object(map)), Some(Segment::Key(k))) => {
                    map.remove(k);
                }
                _ => return Err(unresolvable()),
            }
        }
    }

    let patched: Skill = serde_json::from_value(doc).map_err(|e| mismatch(e.to_string()))?;
    if patched.system != patch.target {
        return Err(mismatch("a patch may not rename its skill".into()));
    }

    let mut out = catalog.clone();
    *out.get_mut(&patch.target).expect("target exists") = patched;
    let id = patch.id();
    if !out.lineage().iter().any(|l| l.patch_id == id) {
        out.push_lineage(LineageEntry {
            timestamp: clock.now(),
            skill: patch.target.clone(),
            field_path: patch.path.to_string(),
            patch_id: id,
            signal_id: patch.provenance.signal_id.clone(),
        });
    }
    Ok(out)
}

fn split_last_key(path: &FieldPath) -> Option<(FieldPath, String)> {
    match path.segments().last()? {
        Segment::Key(k) => Some((path.parent()?, k.clone())),
        _ => None,
    }
}
