//! Typed intent: the six workload dimensions a deployment is planned from.
//!
//! Parsing is deliberately lenient about absence (every dimension is
//! optional at parse time) and strict about types. Missing dimensions,
//! defaults, and infeasibility are the business of [`validate_intent`].

mod parse;
mod rules;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::consistency::ConsistencyLevel;

pub use parse::{parse_intent, IntentParseError};
pub use rules::{Condition, ConditionOp, InfeasibilityRule, InfeasibilityRules};
pub use validate::{
    validate_intent, validate_intent_with, DefaultApplied, Finding, ValidationOutcome,
    ValidationReport,
};

/// Read access-pattern tags understood by the shipped rule tables.
pub mod tags {
    pub const OLAP_RANGE_SCAN: &str = "olap_range_scan";
    pub const POINT_LOOKUP: &str = "point_lookup";
    pub const STREAMING: &str = "streaming";
    pub const FULLTEXT_SEARCH: &str = "fulltext_search";
    pub const HIGH_THROUGHPUT_APPEND: &str = "high_throughput_append";
    pub const TRANSACTIONAL_UPDATE: &str = "transactional_update";
}

pub const DIMENSIONS: [&str; 6] = [
    "data_model",
    "access_pattern",
    "scale",
    "latency",
    "consistency",
    "cost",
];

type Extra = BTreeMap<String, serde_yaml::Value>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntentSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_model: Option<DataModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub access_pattern: Option<AccessPattern>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<BTreeMap<String, ConsistencyLevel>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<Cost>,
    /// Top-level keys outside the six dimensions, kept for round-tripping.
    #[serde(flatten)]
    pub extensions: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DataModel {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entities: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primary_types: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AccessPattern {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub read: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Scale {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingest_rate_events_per_sec: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retention_history_years: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concurrent_users: Option<i64>,
    #[serde(flatten)]
    pub extra: Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostPreference {
    Simplicity,
    Performance,
    Cost,
}

impl CostPreference {
    pub fn as_str(self) -> &'static str {
        match self {
            CostPreference::Simplicity => "simplicity",
            CostPreference::Performance => "performance",
            CostPreference::Cost => "cost",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Cost {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monthly_usd_budget: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preference: Option<CostPreference>,
    #[serde(flatten)]
    pub extra: Extra,
}

impl IntentSpec {
    pub fn has_dimension(&self, name: &str) -> bool {
        match name {
            "data_model" => self.data_model.is_some(),
            "access_pattern" => self.access_pattern.is_some(),
            "scale" => self.scale.is_some(),
            "latency" => self.latency.is_some(),
            "consistency" => self.consistency.is_some(),
            "cost" => self.cost.is_some(),
            _ => false,
        }
    }

    pub fn entities(&self) -> &[String] {
        self.data_model
            .as_ref()
            .and_then(|d| d.entities.as_deref())
            .unwrap_or(&[])
    }

    pub fn primary_types(&self) -> &[String] {
        self.data_model
            .as_ref()
            .and_then(|d| d.primary_types.as_deref())
            .unwrap_or(&[])
    }

    pub fn reads(&self) -> &[String] {
        self.access_pattern
            .as_ref()
            .and_then(|a| a.read.as_deref())
            .unwrap_or(&[])
    }

    pub fn writes(&self) -> &[String] {
        self.access_pattern
            .as_ref()
            .and_then(|a| a.write.as_deref())
            .unwrap_or(&[])
    }

    pub fn reads_tag(&self, tag: &str) -> bool {
        self.reads().iter().any(|t| t == tag)
    }

    pub fn writes_tag(&self, tag: &str) -> bool {
        self.writes().iter().any(|t| t == tag)
    }

    pub fn ingest_rate(&self) -> i64 {
        self.scale
            .as_ref()
            .and_then(|s| s.ingest_rate_events_per_sec)
            .unwrap_or(0)
    }

    pub fn retention_years(&self) -> f64 {
        self.scale
            .as_ref()
            .and_then(|s| s.retention_history_years)
            .unwrap_or(0.0)
    }

    pub fn budget_usd(&self) -> Option<f64> {
        self.cost.as_ref().and_then(|c| c.monthly_usd_budget)
    }

    pub fn preference(&self) -> Option<CostPreference> {
        self.cost.as_ref().and_then(|c| c.preference)
    }

    pub fn latency_budgets(&self) -> impl Iterator<Item = (&str, f64)> {
        self.latency
            .iter()
            .flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), *v)))
    }

    pub fn consistency_levels(&self) -> impl Iterator<Item = (&str, &ConsistencyLevel)> {
        self.consistency
            .iter()
            .flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), v)))
    }

    pub fn has_consistency(&self, level: &ConsistencyLevel) -> bool {
        self.consistency_levels().any(|(_, l)| l == level)
    }

    /// The document form: a mapping with the single top-level key `intent`.
    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            intent: &'a IntentSpec,
        }
        serde_yaml::to_string(&Doc { intent: self }).expect("intent serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("intent serializes")
    }
}

/// Maps a latency budget name to the read access pattern it constrains.
///
/// Explicit bindings come first; otherwise `<tag>_p99_ms` binds to `<tag>`.
pub fn latency_budget_pattern(budget: &str) -> Option<&str> {
    const BINDINGS: [(&str, &str); 2] = [
        ("point_lookup_p99_ms", tags::POINT_LOOKUP),
        ("analytical_query_p99_ms", tags::OLAP_RANGE_SCAN),
    ];
    if let Some((_, tag)) = BINDINGS.iter().find(|(name, _)| *name == budget) {
        return Some(tag);
    }
    budget.strip_suffix("_p99_ms")
}

/// Budget (ms) that binds to `pattern`, if the intent declares one. When
/// several names bind to the same pattern the tightest wins.
pub fn latency_budget_for(intent: &IntentSpec, pattern: &str) -> Option<(String, f64)> {
    intent
        .latency_budgets()
        .filter(|(name, _)| latency_budget_pattern(name) == Some(pattern))
        .map(|(n, v)| (n.to_string(), v))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

/// Resolves a consistency key to a declared entity.
///
/// Keys match an entity exactly, as its plural (`positions` -> `position`),
/// or as a derived aggregate sharing the entity's leading name segment
/// (`ohlcv_aggregate` -> `ohlcv_bar`).
pub fn resolve_entity<'a>(key: &str, entities: &'a [String]) -> Option<&'a str> {
    if let Some(e) = entities.iter().find(|e| e.as_str() == key) {
        return Some(e);
    }
    if let Some(e) = entities
        .iter()
        .find(|e| key == format!("{e}s") || key == format!("{e}es"))
    {
        return Some(e);
    }
    let stem = |s: &str| s.split('_').next().map(str::to_string);
    if key.contains('_') {
        let k = stem(key);
        return entities
            .iter()
            .find(|e| e.contains('_') && stem(e) == k)
            .map(String::as_str);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entity_resolution() {
        let ents: Vec<String> = ["market_tick", "ohlcv_bar", "position", "order"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(resolve_entity("positions", &ents), Some("position"));
        assert_eq!(resolve_entity("ohlcv_aggregate", &ents), Some("ohlcv_bar"));
        assert_eq!(resolve_entity("order", &ents), Some("order"));
        assert_eq!(resolve_entity("invoices", &ents), None);
        assert_eq!(resolve_entity("user_profile", &ents), None);
    }

    #[test]
    fn budget_binding() {
        assert_eq!(latency_budget_pattern("point_lookup_p99_ms"), Some("point_lookup"));
        assert_eq!(
            latency_budget_pattern("analytical_query_p99_ms"),
            Some("olap_range_scan")
        );
        assert_eq!(
            latency_budget_pattern("fulltext_search_p99_ms"),
            Some("fulltext_search")
        );
        assert_eq!(latency_budget_pattern("whatever"), None);
    }
}
