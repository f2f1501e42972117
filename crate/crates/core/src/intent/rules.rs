use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fieldpath::FieldPath;

const DEFAULT_RULES: &str = include_str!("../../config/infeasibility.yaml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionOp {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
    /// List value equals the given list as a set.
    SetEq,
    /// List value contains the given scalar.
    Contains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub path: FieldPath,
    pub op: ConditionOp,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityRule {
    pub id: String,
    pub dimension: String,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub all: Vec<Condition>,
    #[serde(default)]
    pub any: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityRules {
    pub rules: Vec<InfeasibilityRule>,
}

impl Default for InfeasibilityRules {
    fn default() -> Self {
        Self::from_yaml(DEFAULT_RULES).expect("shipped infeasibility rules parse")
    }
}

impl InfeasibilityRules {
    pub fn from_yaml(doc: &str) -> Result<Self, serde_yaml::Error> {
        serde_yaml::from_str(doc)
    }

    /// Rules that fire against the intent's document tree.
    pub fn firing<'a>(&'a self, intent: &'a Value) -> impl Iterator<Item = &'a InfeasibilityRule> {
        self.rules.iter().filter(move |r| r.fires(intent))
    }
}

impl InfeasibilityRule {
    pub fn fires(&self, intent: &Value) -> bool {
        self.all.iter().all(|c| c.holds(intent))
            && (self.any.is_empty() || self.any.iter().any(|c| c.holds(intent)))
    }
}

impl Condition {
    pub fn holds(&self, root: &Value) -> bool {
        self.path
            .resolve_all(root)
            .into_iter()
            .any(|v| apply(self.op, v, &self.value))
    }
}

fn apply(op: ConditionOp, actual: &Value, expected: &Value) -> bool {
    match op {
        ConditionOp::Eq => scalar_eq(actual, expected),
        ConditionOp::Ne => !scalar_eq(actual, expected),
        ConditionOp::Gt | ConditionOp::Ge | ConditionOp::Lt | ConditionOp::Le => {
            match (actual.as_f64(), expected.as_f64()) {
                (Some(a), Some(b)) => match op {
                    ConditionOp::Gt => a > b,
                    ConditionOp::Ge => a >= b,
                    ConditionOp::Lt => a < b,
                    _ => a <= b,
                },
                _ => false,
            }
        }
        ConditionOp::SetEq => match (actual.as_array(), expected.as_array()) {
            (Some(a), Some(b)) => {
                a.iter().all(|x| b.iter().any(|y| scalar_eq(x, y)))
                    && b.iter().all(|y| a.iter().any(|x| scalar_eq(x, y)))
            }
            _ => false,
        },
        ConditionOp::Contains => actual
            .as_array()
            .map(|a| a.iter().any(|x| scalar_eq(x, expected)))
            .unwrap_or(false),
    }
}

fn scalar_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}
