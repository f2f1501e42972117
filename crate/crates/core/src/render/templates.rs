//! Embedded artifact templates and per-system rendering facts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consistency::ConsistencyLattice;
use crate::intent::{resolve_entity, IntentSpec};

const SYSTEMS: &str = include_str!("../../templates/systems.yaml");

const FILES: [(&str, &str); 7] = [
    ("services/kafka.yaml", include_str!("../../templates/services/kafka.yaml")),
    ("services/clickhouse.yaml", include_str!("../../templates/services/clickhouse.yaml")),
    ("services/postgresql.yaml", include_str!("../../templates/services/postgresql.yaml")),
    ("services/redis.yaml", include_str!("../../templates/services/redis.yaml")),
    ("init/clickhouse.analytics.sql", include_str!("../../templates/init/clickhouse.analytics.sql")),
    (
        "init/clickhouse.kafka_engine_materialized_view.sql",
        include_str!("../../templates/init/clickhouse.kafka_engine_materialized_view.sql"),
    ),
    ("init/postgresql.operational.sql", include_str!("../../templates/init/postgresql.operational.sql")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTemplate {
    pub default_image: String,
    #[serde(default)]
    pub ports: Vec<u16>,
    pub service: String,
    /// Role -> init script template.
    #[serde(default)]
    pub init: BTreeMap<String, String>,
    /// Inbound connector -> extra init script template.
    #[serde(default)]
    pub connectors: BTreeMap<String, String>,
    #[serde(default)]
    pub init_mount: Option<String>,
    #[serde(default)]
    pub ttl_column: Option<String>,
    #[serde(default)]
    pub ttl_wrap: Option<String>,
    #[serde(default)]
    pub smoke_query: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProducerTemplate {
    pub image: String,
    pub runtime: String,
    pub template: String,
    /// Target system -> packages the producer source imports.
    #[serde(default)]
    pub requires: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTemplates {
    pub systems: BTreeMap<String, SystemTemplate>,
    pub producer: ProducerTemplate,
}

impl Default for SystemTemplates {
    fn default() -> Self {
        serde_yaml::from_str(SYSTEMS).expect("shipped system templates parse")
    }
}

impl SystemTemplates {
    pub fn get(&self, system: &str) -> Option<&SystemTemplate> {
        self.systems.get(system)
    }

    /// Image used when a skill recommends none.
    pub fn default_image(&self, system: &str) -> String {
        self.get(system)
            .map(|t| t.default_image.clone())
            .unwrap_or_else(|| format!("{system}:latest"))
    }

    pub fn ports(&self, system: &str) -> &[u16] {
        self.get(system).map(|t| t.ports.as_slice()).unwrap_or(&[])
    }

    pub fn init_template(&self, system: &str, role: &str) -> Option<&'static str> {
        self.get(system)?.init.get(role).and_then(|p| file(p))
    }

    pub fn connector_template(&self, system: &str, connector: &str) -> Option<&'static str> {
        self.get(system)?.connectors.get(connector).and_then(|p| file(p))
    }

    pub fn service_template(&self, system: &str) -> Option<&'static str> {
        self.get(system).and_then(|t| file(&t.service))
    }
}

/// Table a store role materializes: analytics stores take the first declared
/// entity, operational stores the entity with the strongest consistency.
pub fn table_for_role(role: &str, intent: &IntentSpec, lattice: &ConsistencyLattice) -> String {
    let entities = intent.entities();
    let first = entities.first().cloned().unwrap_or_else(|| "events".to_string());
    if role != "operational" {
        return first;
    }
    intent
        .consistency_levels()
        .max_by_key(|(_, l)| lattice.rank(l))
        .and_then(|(k, _)| resolve_entity(k, entities))
        .map(str::to_string)
        .unwrap_or(first)
}

/// `INTERVAL n YEAR`, or months when the retention is fractional.
pub fn retention_interval(years: f64) -> Option<String> {
    if years <= 0.0 {
        return None;
    }
    if years.fract() == 0.0 {
        Some(format!("INTERVAL {} YEAR", years as i64))
    } else {
        Some(format!("INTERVAL {} MONTH", (years * 12.0).round() as i64))
    }
}

pub fn file(path: &str) -> Option<&'static str> {
    FILES.iter().find(|(p, _)| *p == path).map(|(_, t)| *t)
}

/// Replaces `{{hole}}` markers. A hole that fills a whole line with an empty
/// value removes the line. Unfilled holes are returned as the error.
pub fn fill(template: &str, holes: &BTreeMap<&str, String>) -> Result<String, Vec<String>> {
    let mut out = String::with_capacity(template.len());
    for line in template.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix("{{").and_then(|s| s.strip_suffix("}}")) {
            if let Some(v) = holes.get(name) {
                if v.is_empty() {
                    continue;
                }
            }
        }
        out.push_str(line);
    }
    for (k, v) in holes {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    let mut missing = Vec::new();
    let mut rest = out.as_str();
    while let Some(i) = rest.find("{{") {
        let after = &rest[i + 2..];
        match after.find("}}") {
            Some(j) => {
                missing.push(after[..j].to_string());
                rest = &after[j + 2..];
            }
            None => break,
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(missing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_referenced_file_is_embedded() {
        let t = SystemTemplates::default();
        for s in t.systems.values() {
            assert!(file(&s.service).is_some(), "{}", s.service);
            for p in s.init.values().chain(s.connectors.values()) {
                assert!(file(p).is_some(), "{p}");
            }
        }
    }

    #[test]
    fn empty_whole_line_hole_drops_line() {
        let holes = BTreeMap::from([("a", String::new()), ("b", "x".to_string())]);
        assert_eq!(fill("1\n{{a}}\n{{b}}-2\n", &holes).unwrap(), "1\nx-2\n");
        assert_eq!(fill("{{c}}", &holes).unwrap_err(), ["c"]);
    }
}
