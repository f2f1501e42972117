use std::collections::BTreeMap;

use serde_yaml::{Mapping, Value};
use thiserror::Error;

use super::{AccessPattern, Cost, CostPreference, DataModel, Extra, IntentSpec, Scale};
use crate::consistency::ConsistencyLevel;

#[derive(Debug, Error, PartialEq)]
pub enum IntentParseError {
    #[error("malformed intent document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("intent document has no top-level `intent` key")]
    MissingRoot,
    #[error("field `{path}`: expected {expected}, found {found}")]
    FieldType {
        path: String,
        expected: &'static str,
        found: String,
    },
}

/// Parses an intent document. An empty document yields an intent with every
/// dimension absent.
pub fn parse_intent(document: &str) -> Result<IntentSpec, IntentParseError> {
    let root: Value = serde_yaml::from_str(document).map_err(|e| {
        let (line, column) = e
            .location()
            .map(|l| (l.line(), l.column()))
            .unwrap_or((0, 0));
        IntentParseError::Syntax {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let body = match root {
        Value::Null => return Ok(IntentSpec::default()),
        Value::Mapping(mut m) => match m.remove("intent") {
            Some(v) => v,
            None if m.is_empty() => return Ok(IntentSpec::default()),
            None => return Err(IntentParseError::MissingRoot),
        },
        other => {
            return Err(type_err("<root>", "a mapping", &other));
        }
    };
    let mut map = match body {
        Value::Null => return Ok(IntentSpec::default()),
        Value::Mapping(m) => m,
        other => return Err(type_err("intent", "a mapping", &other)),
    };

    let mut spec = IntentSpec {
        data_model: take_section(&mut map, "data_model", |m, p| {
            Ok(DataModel {
                entities: take_str_list(m, p, "entities")?,
                primary_types: take_str_list(m, p, "primary_types")?,
                extra: leftovers(m)?,
            })
        })?,
        access_pattern: take_section(&mut map, "access_pattern", |m, p| {
            Ok(AccessPattern {
                read: take_str_list(m, p, "read")?,
                write: take_str_list(m, p, "write")?,
                extra: leftovers(m)?,
            })
        })?,
        scale: take_section(&mut map, "scale", |m, p| {
            Ok(Scale {
                ingest_rate_events_per_sec: take_int(m, p, "ingest_rate_events_per_sec")?,
                retention_history_years: take_number(m, p, "retention_history_years")?,
                concurrent_users: take_int(m, p, "concurrent_users")?,
                extra: leftovers(m)?,
            })
        })?,
        latency: take_section(&mut map, "latency", |m, p| {
            let mut out = BTreeMap::new();
            for (k, v) in std::mem::take(m) {
                let key = key_string(&k, p)?;
                let path = format!("{p}.{key}");
                let n = as_number(&v).ok_or_else(|| type_err(&path, "a number (ms)", &v))?;
                out.insert(key, n);
            }
            Ok(out)
        })?,
        consistency: take_section(&mut map, "consistency", |m, p| {
            let mut out = BTreeMap::new();
            for (k, v) in std::mem::take(m) {
                let key = key_string(&k, p)?;
                let path = format!("{p}.{key}");
                match v {
                    Value::String(s) => {
                        out.insert(key, ConsistencyLevel::new(s));
                    }
                    other => return Err(type_err(&path, "a consistency level name", &other)),
                }
            }
            Ok(out)
        })?,
        cost: take_section(&mut map, "cost", |m, p| {
            let monthly_usd_budget = take_number(m, p, "monthly_usd_budget")?;
            let preference = match m.remove("preference") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    serde_yaml::from_value::<CostPreference>(v.clone()).map_err(|_| {
                        type_err(
                            &format!("{p}.preference"),
                            "one of simplicity | performance | cost",
                            &v,
                        )
                    })?,
                ),
            };
            Ok(Cost {
                monthly_usd_budget,
                preference,
                extra: leftovers(m)?,
            })
        })?,
        extensions: Extra::new(),
    };
    spec.extensions = leftovers(&mut map)?;
    Ok(spec)
}

fn take_section<T>(
    map: &mut Mapping,
    key: &str,
    f: impl FnOnce(&mut Mapping, &str) -> Result<T, IntentParseError>,
) -> Result<Option<T>, IntentParseError> {
    let path = format!("intent.{key}");
    match map.remove(key) {
        None => Ok(None),
        Some(Value::Null) => Ok(None),
        Some(Value::Mapping(mut m)) => f(&mut m, &path).map(Some),
        Some(other) => Err(type_err(&path, "a mapping", &other)),
    }
}

fn take_str_list(
    m: &mut Mapping,
    parent: &str,
    key: &str,
) -> Result<Option<Vec<String>>, IntentParseError> {
    let path = format!("{parent}.{key}");
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Sequence(items)) => items
            .into_iter()
            .enumerate()
            .map(|(i, v)| match v {
                Value::String(s) => Ok(s),
                other => Err(type_err(&format!("{path}[{i}]"), "a string tag", &other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(other) => Err(type_err(&path, "a list of strings", &other)),
    }
}

fn take_int(m: &mut Mapping, parent: &str, key: &str) -> Result<Option<i64>, IntentParseError> {
    let path = format!("{parent}.{key}");
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) if n.is_i64() => Ok(n.as_i64()),
        Some(Value::Number(n)) if n.is_u64() => Ok(Some(i64::MAX.min(n.as_u64().unwrap_or(0) as i64))),
        Some(other) => Err(type_err(&path, "an integer", &other)),
    }
}

fn take_number(m: &mut Mapping, parent: &str, key: &str) -> Result<Option<f64>, IntentParseError> {
    let path = format!("{parent}.{key}");
    match m.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_number(&v)
            .map(Some)
            .ok_or_else(|| type_err(&path, "a number", &v)),
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

fn key_string(k: &Value, parent: &str) -> Result<String, IntentParseError> {
    match k {
        Value::String(s) => Ok(s.clone()),
        other => Err(type_err(parent, "string keys", other)),
    }
}

fn leftovers(m: &mut Mapping) -> Result<Extra, IntentParseError> {
    let mut out = Extra::new();
    for (k, v) in std::mem::take(m) {
        out.insert(key_string(&k, "intent")?, v);
    }
    Ok(out)
}

fn type_err(path: &str, expected: &'static str, found: &Value) -> IntentParseError {
    let found = match found {
        Value::Null => "null".to_string(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Sequence(_) => "a list".to_string(),
        Value::Mapping(_) => "a mapping".to_string(),
        Value::Tagged(_) => "a tagged value".to_string(),
    };
    IntentParseError::FieldType {
        path: path.to_string(),
        expected,
        found,
    }
}
