use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use super::{init_path, producer_path, ArtifactSet, ProducerManifest, SmokeSpec, COMPOSE_PATH, SMOKE_PATH};
use crate::skill::ddl::split_statements;

/// Statement keywords accepted by the init-script lexer.
pub const ALLOWED_SQL_KEYWORDS: [&str; 12] = [
    "CREATE", "ALTER", "INSERT", "DROP", "GRANT", "SET", "SELECT", "COMMENT", "DO", "BEGIN",
    "COMMIT", "TRUNCATE",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct T0Finding {
    pub artifact: String,
    pub code: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct T0Report {
    pub findings: Vec<T0Finding>,
}

impl T0Report {
    pub fn pass(&self) -> bool {
        self.findings.is_empty()
    }
}

fn finding(artifact: &str, code: &str, detail: impl Into<String>) -> T0Finding {
    T0Finding {
        artifact: artifact.to_string(),
        code: code.to_string(),
        detail: detail.into(),
    }
}

/// Syntax tier: structured documents parse with their required fields,
/// and every init statement starts with a known keyword.
pub fn t0_check(artifacts: &ArtifactSet) -> T0Report {
    let mut findings = Vec::new();

    for (line, key) in duplicate_keys(&artifacts.compose) {
        findings.push(finding(
            COMPOSE_PATH,
            "DUPLICATE_KEY",
            format!("key `{key}` repeated at line {line}"),
        ));
    }
    match serde_yaml::from_str::<Value>(&artifacts.compose) {
        Err(e) => {
            // Duplicate keys already reported; the parser rejects them too.
            if findings.is_empty() {
                findings.push(finding(COMPOSE_PATH, "SYNTAX", e.to_string()));
            }
        }
        Ok(doc) => match doc.get("services").and_then(Value::as_mapping) {
            None => findings.push(finding(COMPOSE_PATH, "MISSING_FIELD", "no `services` mapping")),
            Some(services) => {
                for (name, svc) in services {
                    let name = name.as_str().unwrap_or("?");
                    if svc.get("image").and_then(Value::as_str).is_none() {
                        findings.push(finding(
                            COMPOSE_PATH,
                            "MISSING_FIELD",
                            format!("service `{name}` has no image"),
                        ));
                    }
                }
            }
        },
    }

    for (system, sql) in &artifacts.init_scripts {
        let path = init_path(system);
        let stmts = split_statements(sql);
        if stmts.is_empty() {
            findings.push(finding(&path, "EMPTY_SCRIPT", "no statements"));
        }
        for s in stmts {
            let kw = s.keyword();
            if !ALLOWED_SQL_KEYWORDS.contains(&kw.as_str()) {
                findings.push(finding(
                    &path,
                    "STATEMENT_LEX",
                    format!("line {}: statement starts with `{kw}`", s.line),
                ));
            }
        }
    }

    for (name, text) in &artifacts.producer_manifests {
        if let Err(e) = serde_yaml::from_str::<ProducerManifest>(text) {
            findings.push(finding(&producer_path(name), "SCHEMA", e.to_string()));
        }
    }
    if let Err(e) = serde_yaml::from_str::<SmokeSpec>(&artifacts.smoke_spec) {
        findings.push(finding(SMOKE_PATH, "SCHEMA", e.to_string()));
    }

    T0Report { findings }
}

/// Line-level scan for repeated keys within one block mapping.
fn duplicate_keys(text: &str) -> Vec<(usize, String)> {
    // (indent, keys seen at that indent in the current block)
    let mut stack: Vec<(usize, BTreeSet<String>)> = Vec::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut indent = raw.len() - trimmed.len();
        let mut body = trimmed;
        if let Some(rest) = body.strip_prefix("- ") {
            // A list item opens a fresh mapping scope.
            indent += 2;
            stack.retain(|(d, _)| *d < indent);
            body = rest;
        }
        let Some((key, _)) = body.split_once(':') else {
            continue;
        };
        if key.is_empty() || key.contains(' ') && !key.starts_with('"') {
            continue;
        }
        while stack.last().is_some_and(|(d, _)| *d > indent) {
            stack.pop();
        }
        if stack.last().map(|(d, _)| *d) != Some(indent) {
            stack.push((indent, BTreeSet::new()));
        }
        let seen = &mut stack.last_mut().expect("scope pushed").1;
        if !seen.insert(key.trim_matches('"').to_string()) {
            out.push((i + 1, key.to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_duplicate() {
        let text = "services:\n  a:\n    image: x\n  b:\n    image: y\n  a:\n    image: z\n";
        assert_eq!(duplicate_keys(text), [(6, "a".to_string())]);
    }

    #[test]
    fn same_key_in_sibling_blocks_is_fine() {
        let text = "services:\n  a:\n    image: x\n  b:\n    image: y\n";
        assert!(duplicate_keys(text).is_empty());
    }
}
