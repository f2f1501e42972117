use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{Skill, SkillCatalog};

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Compact JSON with object keys sorted and integral floats rendered as
/// integers, so `25` and `25.0` hash alike.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(v).expect("scalar serializes"))
        }
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() && f.fract() == 0.0 && f.abs() < 1e15 => {
                out.push_str(&(f as i64).to_string())
            }
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

impl Skill {
    /// Hash of the typed document, independent of key order, comments, and
    /// scalar spelling in the source file.
    pub fn content_hash(&self) -> String {
        let v = serde_json::to_value(self).expect("skill serializes");
        sha256_hex(canonical_json(&v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockEntry {
    pub system: String,
    pub version: String,
    pub file: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockFile {
    pub skills: Vec<LockEntry>,
    pub catalog_hash: String,
}

impl LockFile {
    pub fn from_catalog(catalog: &SkillCatalog) -> Self {
        let skills = catalog
            .skills()
            .map(|s| LockEntry {
                system: s.system.clone(),
                version: s.version.clone(),
                file: catalog.file_of(&s.system),
                hash: s.content_hash(),
            })
            .collect();
        Self {
            skills,
            catalog_hash: catalog.lock_hash(),
        }
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("lock serializes")
    }

    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    pub fn entry(&self, system: &str) -> Option<&LockEntry> {
        self.skills.iter().find(|e| e.system == system)
    }
}

/// The `skills.lock` document for `catalog`.
pub fn write_lock(catalog: &SkillCatalog) -> String {
    LockFile::from_catalog(catalog).to_yaml()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_order_and_float_spelling_ignored() {
        let a = json!({"b": 1, "a": {"y": 25.0, "x": [1, 2]}});
        let b = json!({"a": {"x": [1, 2], "y": 25}, "b": 1});
        assert_eq!(canonical_json(&a), canonical_json(&b));
        assert_eq!(canonical_json(&a), r#"{"a":{"x":[1,2],"y":25},"b":1}"#);
    }

    #[test]
    fn empty_hash() {
        assert_eq!(
            sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
