use serde::{Deserialize, Serialize};

use super::rules::InfeasibilityRules;
use super::{latency_budget_pattern, resolve_entity, CostPreference, IntentSpec, DIMENSIONS};
use crate::consistency::ConsistencyLattice;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub dimension: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultApplied {
    pub field_path: String,
    pub value: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub hard_errors: Vec<Finding>,
    pub soft_warnings: Vec<Finding>,
    pub defaults_applied: Vec<DefaultApplied>,
}

impl ValidationReport {
    pub fn valid(&self) -> bool {
        self.hard_errors.is_empty()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.hard_errors
            .iter()
            .chain(&self.soft_warnings)
            .any(|f| f.code == code)
    }

    pub fn to_yaml(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            valid: bool,
            #[serde(flatten)]
            report: &'a ValidationReport,
        }
        serde_yaml::to_string(&Doc {
            valid: self.valid(),
            report: self,
        })
        .expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOutcome {
    pub report: ValidationReport,
    /// Copy of the input with defaults filled in; the input is untouched.
    pub defaulted: IntentSpec,
}

fn finding(dimension: &str, code: &str, message: impl Into<String>) -> Finding {
    Finding {
        dimension: dimension.to_string(),
        code: code.to_string(),
        message: message.into(),
    }
}

pub fn validate_intent(spec: &IntentSpec) -> ValidationOutcome {
    validate_intent_with(spec, &InfeasibilityRules::default(), &ConsistencyLattice::default())
}

pub fn validate_intent_with(
    spec: &IntentSpec,
    rules: &InfeasibilityRules,
    lattice: &ConsistencyLattice,
) -> ValidationOutcome {
    let mut report = ValidationReport::default();
    let mut defaulted = spec.clone();

    for dim in DIMENSIONS {
        if !spec.has_dimension(dim) {
            report.hard_errors.push(finding(
                dim,
                "MISSING_DIMENSION",
                format!("dimension `{dim}` is required"),
            ));
        }
    }

    for key in spec.extensions.keys() {
        report.soft_warnings.push(finding(
            key,
            "UNKNOWN_KEY",
            format!("unknown top-level key `{key}` ignored"),
        ));
    }

    if let Some(dm) = &spec.data_model {
        if dm.entities.is_none() {
            missing_field(&mut report, "data_model", "entities");
        }
        if dm.primary_types.is_none() {
            missing_field(&mut report, "data_model", "primary_types");
        }
        unknown_nested(&mut report, "data_model", dm.extra.keys());
    }

    if let Some(ap) = &spec.access_pattern {
        if ap.read.is_none() {
            missing_field(&mut report, "access_pattern", "read");
        }
        if ap.write.is_none() {
            missing_field(&mut report, "access_pattern", "write");
        }
        unknown_nested(&mut report, "access_pattern", ap.extra.keys());
    }

    if let Some(scale) = &spec.scale {
        match scale.ingest_rate_events_per_sec {
            None => missing_field(&mut report, "scale", "ingest_rate_events_per_sec"),
            Some(r) if r < 0 => report.hard_errors.push(finding(
                "scale",
                "NEGATIVE_VALUE",
                format!("ingest_rate_events_per_sec must be >= 0, got {r}"),
            )),
            _ => {}
        }
        match scale.retention_history_years {
            None => missing_field(&mut report, "scale", "retention_history_years"),
            Some(y) if y < 0.0 => report.hard_errors.push(finding(
                "scale",
                "NEGATIVE_VALUE",
                format!("retention_history_years must be >= 0, got {y}"),
            )),
            _ => {}
        }
        match scale.concurrent_users {
            None => {
                let d = defaulted.scale.as_mut().expect("scale present");
                d.concurrent_users = Some(1);
                report.defaults_applied.push(DefaultApplied {
                    field_path: "scale.concurrent_users".into(),
                    value: 1.into(),
                });
            }
            Some(u) if u < 1 => report.hard_errors.push(finding(
                "scale",
                "NON_POSITIVE_VALUE",
                format!("concurrent_users must be positive, got {u}"),
            )),
            _ => {}
        }
        unknown_nested(&mut report, "scale", scale.extra.keys());
    }

    if let Some(lat) = &spec.latency {
        if lat.is_empty() {
            report.hard_errors.push(finding(
                "latency",
                "MISSING_FIELD",
                "latency declares no budgets",
            ));
        }
        for name in lat.keys() {
            let bound = latency_budget_pattern(name)
                .map(|p| spec.reads_tag(p))
                .unwrap_or(false);
            if !bound {
                report.soft_warnings.push(finding(
                    "latency",
                    "UNBOUND_LATENCY_BUDGET",
                    format!("budget `{name}` binds to no declared read pattern"),
                ));
            }
        }
    }

    if let Some(cons) = &spec.consistency {
        let entities = spec.entities();
        for (entity, level) in cons {
            if !lattice.contains(level) {
                report.hard_errors.push(finding(
                    "consistency",
                    "UNKNOWN_CONSISTENCY_LEVEL",
                    format!("`{entity}` uses unknown level `{level}`"),
                ));
            }
            if spec.data_model.is_some() && resolve_entity(entity, entities).is_none() {
                report.hard_errors.push(finding(
                    "consistency",
                    "UNKNOWN_ENTITY",
                    format!("`{entity}` is not a declared entity"),
                ));
            }
        }
    }

    if let Some(cost) = &spec.cost {
        match cost.monthly_usd_budget {
            None => missing_field(&mut report, "cost", "monthly_usd_budget"),
            Some(b) if b < 0.0 => report.hard_errors.push(finding(
                "cost",
                "NEGATIVE_VALUE",
                format!("monthly_usd_budget must be >= 0, got {b}"),
            )),
            _ => {}
        }
        if cost.preference.is_none() {
            let d = defaulted.cost.as_mut().expect("cost present");
            d.preference = Some(CostPreference::Simplicity);
            report.soft_warnings.push(finding(
                "cost",
                "UNDER_SPECIFIED",
                "cost preference under-specified, defaulted to simplicity",
            ));
            report.defaults_applied.push(DefaultApplied {
                field_path: "cost.preference".into(),
                value: "simplicity".into(),
            });
        }
        unknown_nested(&mut report, "cost", cost.extra.keys());
    }

    let doc = spec.to_json_value();
    for rule in rules.firing(&doc) {
        report.hard_errors.push(Finding {
            dimension: rule.dimension.clone(),
            code: rule.code.clone(),
            message: format!("{} ({})", rule.message, rule.id),
        });
    }

    ValidationOutcome { report, defaulted }
}

fn missing_field(report: &mut ValidationReport, dim: &str, field: &str) {
    report.hard_errors.push(finding(
        dim,
        "MISSING_FIELD",
        format!("`{dim}.{field}` is required"),
    ));
}

fn unknown_nested<'a>(
    report: &mut ValidationReport,
    dim: &str,
    keys: impl Iterator<Item = &'a String>,
) {
    for k in keys {
        report.soft_warnings.push(finding(
            dim,
            "UNKNOWN_KEY",
            format!("unknown key `{dim}.{k}` ignored"),
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intent::parse_intent;

    const MINIMAL: &str = "intent:
  data_model: {entities: [account], primary_types: [relational]}
  access_pattern: {read: [point_lookup], write: [transactional_update]}
  scale: {ingest_rate_events_per_sec: 10, retention_history_years: 1}
  latency: {point_lookup_p99_ms: 20}
  consistency: {accounts: strong}
  cost: {monthly_usd_budget: 50, preference: cost}
";

    #[test]
    fn missing_latency_dimension() {
        let doc = MINIMAL.replace("  latency: {point_lookup_p99_ms: 20}\n", "");
        let out = validate_intent(&parse_intent(&doc).unwrap());
        assert!(out
            .report
            .hard_errors
            .iter()
            .any(|f| f.dimension == "latency" && f.code == "MISSING_DIMENSION"));
    }

    #[test]
    fn concurrent_users_defaults_silently() {
        let out = validate_intent(&parse_intent(MINIMAL).unwrap());
        assert!(out.report.valid(), "{:?}", out.report);
        assert!(out.report.soft_warnings.is_empty());
        assert_eq!(out.report.defaults_applied.len(), 1);
        assert_eq!(
            out.defaulted.scale.as_ref().unwrap().concurrent_users,
            Some(1)
        );
    }

    #[test]
    fn unknown_entity_is_hard() {
        let doc = MINIMAL.replace("accounts: strong", "ledgers: strong");
        let out = validate_intent(&parse_intent(&doc).unwrap());
        assert!(out.report.has_code("UNKNOWN_ENTITY"));
    }

    #[test]
    fn unknown_top_level_key_is_soft() {
        let doc = format!("{MINIMAL}  security: {{e2e: true}}\n");
        let out = validate_intent(&parse_intent(&doc).unwrap());
        assert!(out.report.valid());
        assert!(out
            .report
            .soft_warnings
            .iter()
            .any(|f| f.code == "UNKNOWN_KEY"));
    }

    #[test]
    fn strong_over_streaming_only() {
        let doc = MINIMAL.replace("read: [point_lookup]", "read: [streaming]");
        let out = validate_intent(&parse_intent(&doc).unwrap());
        assert!(out.report.has_code("INFEASIBLE_STRONG_OVER_STREAMING"));
    }

    #[test]
    fn non_positive_latency() {
        let doc = MINIMAL.replace("point_lookup_p99_ms: 20", "point_lookup_p99_ms: 0");
        let out = validate_intent(&parse_intent(&doc).unwrap());
        assert!(out.report.has_code("INFEASIBLE_LATENCY_BUDGET"));
    }
}
