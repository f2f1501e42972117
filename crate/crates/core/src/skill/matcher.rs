use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ddl::{base_type, clause_uses};
use super::{Matcher, Severity, Skill};
use crate::intent::Condition;
use crate::operator::{OperatorNode, OperatorType};

/// The operator node a skill is being considered for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingContext {
    pub node_id: String,
    pub op_type: OperatorType,
    pub role: String,
    pub serves: Vec<String>,
    pub writes: Vec<String>,
}

impl From<&OperatorNode> for BindingContext {
    fn from(n: &OperatorNode) -> Self {
        Self {
            node_id: n.id.clone(),
            op_type: n.op_type.clone(),
            role: n.role.clone(),
            serves: n.serves.clone(),
            writes: n.writes.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchContext {
    pub binding: Option<BindingContext>,
    /// Version under consideration; the skill's own version when absent.
    pub version: Option<String>,
    pub intent: Value,
    pub config: Value,
    pub ddl: Vec<String>,
}

impl MatchContext {
    pub fn for_binding(node: &OperatorNode) -> Self {
        Self {
            binding: Some(node.into()),
            ..Self::default()
        }
    }

    pub fn with_ddl(mut self, sql: impl Into<String>) -> Self {
        self.ddl.push(sql.into());
        self
    }

    /// The document config predicates are evaluated against:
    /// `{intent, config, binding}`.
    pub fn document(&self) -> Value {
        json!({
            "intent": self.intent,
            "config": self.config,
            "binding": self.binding.as_ref().map(|b| serde_json::to_value(b).expect("binding serializes")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntiPatternMatch {
    /// Index into the skill's `anti_patterns`.
    pub index: usize,
    pub scenario: String,
    pub severity: Severity,
    pub matcher: Matcher,
    pub detail: String,
}

/// Every (entry, matcher) pair that fires. All matchers are evaluated; a
/// single entry may appear once per matching matcher.
pub fn match_anti_patterns(skill: &Skill, ctx: &MatchContext) -> Vec<AntiPatternMatch> {
    let doc = ctx.document();
    let mut out = Vec::new();
    for (index, ap) in skill.anti_patterns.iter().enumerate() {
        for m in &ap.matchers {
            if let Some(detail) = fires(m, skill, ctx, &doc) {
                out.push(AntiPatternMatch {
                    index,
                    scenario: ap.scenario.clone(),
                    severity: ap.severity,
                    matcher: m.clone(),
                    detail,
                });
            }
        }
    }
    out
}

fn fires(m: &Matcher, skill: &Skill, ctx: &MatchContext, doc: &Value) -> Option<String> {
    match m {
        Matcher::VersionRange { from, until } => {
            let v = ctx.version.as_deref().unwrap_or(&skill.version);
            let lo = from.as_deref().map_or(true, |f| compare_versions(v, f) != Ordering::Less);
            let hi = until
                .as_deref()
                .map_or(true, |u| compare_versions(v, u) == Ordering::Less);
            (lo && hi).then(|| format!("version {v} is in the forbidden range"))
        }
        Matcher::ColumnType {
            column_type,
            clause,
        } => ctx.ddl.iter().find_map(|sql| {
            clause_uses(sql, clause)
                .into_iter()
                .find(|u| u.direct && base_type(&u.column.column_type).eq_ignore_ascii_case(column_type))
                .map(|u| {
                    format!(
                        "{} applied directly to {}.{} ({})",
                        u.clause, u.table, u.column.name, u.column.column_type
                    )
                })
        }),
        Matcher::OperatorPairing {
            op_type,
            role,
            access_pattern,
        } => {
            let b = ctx.binding.as_ref()?;
            let type_ok = op_type.as_ref().map_or(true, |t| *t == b.op_type);
            let role_ok = role.as_ref().map_or(true, |r| *r == b.role);
            let uses = b.serves.iter().chain(&b.writes).any(|p| p == access_pattern);
            (type_ok && role_ok && uses)
                .then(|| format!("node `{}` carries `{access_pattern}`", b.node_id))
        }
        Matcher::ConfigPredicate { path, op, value } => {
            let c = Condition {
                path: path.clone(),
                op: *op,
                value: value.clone(),
            };
            c.holds(doc).then(|| format!("{path} {op:?} {value}"))
        }
    }
}

/// Dotted-numeric comparison; non-numeric segments compare as text and
/// missing segments count as zero.
pub fn compare_versions(a: &str, b: &str) -> Ordering {
    let seg = |s: &str| -> Vec<String> { s.split(['.', '-']).map(str::to_string).collect() };
    let (sa, sb) = (seg(a), seg(b));
    for i in 0..sa.len().max(sb.len()) {
        let x = sa.get(i).map(String::as_str).unwrap_or("0");
        let y = sb.get(i).map(String::as_str).unwrap_or("0");
        let o = match (x.parse::<u64>(), y.parse::<u64>()) {
            (Ok(p), Ok(q)) => p.cmp(&q),
            _ => x.cmp(y),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_ordering() {
        assert_eq!(compare_versions("24.3", "24.10"), Ordering::Less);
        assert_eq!(compare_versions("3.7", "3.7.0"), Ordering::Equal);
        assert_eq!(compare_versions("16", "15.4"), Ordering::Greater);
    }
}
