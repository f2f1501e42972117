//! Dotted field paths such as `operational.recommended_images[0]`.
//!
//! Paths address fields inside a serialized document tree. They are used for
//! skill citations, patch targets, and intent rule predicates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Key(String),
    Index(usize),
    /// `*` matches every element of a list or every value of a map.
    Wildcard,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FieldPath {
    segments: Vec<Segment>,
}

#[derive(Debug, Error, PartialEq)]
pub enum FieldPathError {
    #[error("empty field path")]
    Empty,
    #[error("malformed field path `{0}`")]
    Malformed(String),
}

impl FieldPath {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn push_key(mut self, key: impl Into<String>) -> Self {
        self.segments.push(Segment::Key(key.into()));
        self
    }

    pub fn push_index(mut self, index: usize) -> Self {
        self.segments.push(Segment::Index(index));
        self
    }

    /// Path without its final segment.
    pub fn parent(&self) -> Option<FieldPath> {
        if self.segments.is_empty() {
            return None;
        }
        Some(FieldPath::new(self.segments[..self.segments.len() - 1].to_vec()))
    }

    pub fn first_key(&self) -> Option<&str> {
        match self.segments.first() {
            Some(Segment::Key(k)) => Some(k),
            _ => None,
        }
    }

    /// Drops the first segment (used to strip the system prefix of a citation).
    pub fn tail(&self) -> FieldPath {
        FieldPath::new(self.segments.iter().skip(1).cloned().collect())
    }

    pub fn resolve<'a>(&self, root: &'a Value) -> Option<&'a Value> {
        let mut cur = root;
        for seg in &self.segments {
            cur = match (seg, cur) {
                (Segment::Key(k), Value::Object(map)) => map.get(k)?,
                (Segment::Index(i), Value::Array(items)) => items.get(*i)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    pub fn resolve_mut<'a>(&self, root: &'a mut Value) -> Option<&'a mut Value> {
        let mut cur = root;
        for seg in &self.segments {
            cur = match (seg, cur) {
                (Segment::Key(k), Value::Object(map)) => map.get_mut(k)?,
                (Segment::Index(i), Value::Array(items)) => items.get_mut(*i)?,
                _ => return None,
            };
        }
        Some(cur)
    }

    /// Every value reached by the path, expanding wildcards.
    pub fn resolve_all<'a>(&self, root: &'a Value) -> Vec<&'a Value> {
        let mut frontier = vec![root];
        for seg in &self.segments {
            let mut next = Vec::new();
            for v in frontier {
                match (seg, v) {
                    (Segment::Key(k), Value::Object(map)) => next.extend(map.get(k)),
                    (Segment::Index(i), Value::Array(items)) => next.extend(items.get(*i)),
                    (Segment::Wildcard, Value::Array(items)) => next.extend(items.iter()),
                    (Segment::Wildcard, Value::Object(map)) => next.extend(map.values()),
                    _ => {}
                }
            }
            frontier = next;
        }
        frontier
    }
}

impl FromStr for FieldPath {
    type Err = FieldPathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(FieldPathError::Empty);
        }
        let mut segments = Vec::new();
        for part in s.split('.') {
            if part.is_empty() {
                return Err(FieldPathError::Malformed(s.to_string()));
            }
            let (name, mut rest) = match part.find('[') {
                Some(i) => (&part[..i], &part[i..]),
                None => (part, ""),
            };
            if name == "*" {
                segments.push(Segment::Wildcard);
            } else if !name.is_empty() {
                segments.push(Segment::Key(name.to_string()));
            } else if rest.is_empty() {
                return Err(FieldPathError::Malformed(s.to_string()));
            }
            while !rest.is_empty() {
                let close = rest
                    .find(']')
                    .ok_or_else(|| FieldPathError::Malformed(s.to_string()))?;
                if !rest.starts_with('[') {
                    return Err(FieldPathError::Malformed(s.to_string()));
                }
                let inner = &rest[1..close];
                if inner == "*" {
                    segments.push(Segment::Wildcard);
                } else {
                    let idx = inner
                        .parse::<usize>()
                        .map_err(|_| FieldPathError::Malformed(s.to_string()))?;
                    segments.push(Segment::Index(idx));
                }
                rest = &rest[close + 1..];
            }
        }
        Ok(FieldPath { segments })
    }
}

impl fmt::Display for FieldPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for seg in &self.segments {
            match seg {
                Segment::Key(k) => {
                    if !first {
                        f.write_str(".")?;
                    }
                    f.write_str(k)?;
                }
                Segment::Index(i) => write!(f, "[{i}]")?,
                Segment::Wildcard => {
                    if !first {
                        f.write_str(".")?;
                    }
                    f.write_str("*")?;
                }
            }
            first = false;
        }
        Ok(())
    }
}

impl Serialize for FieldPath {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FieldPath {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn parses_and_displays() {
        for s in [
            "operational.recommended_images[0]",
            "anti_patterns[1].matchers[0]",
            "latency.*",
            "a",
        ] {
            let p: FieldPath = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!("".parse::<FieldPath>().is_err());
        assert!("a..b".parse::<FieldPath>().is_err());
        assert!("a[x]".parse::<FieldPath>().is_err());
        assert!("a[1".parse::<FieldPath>().is_err());
    }

    #[test]
    fn resolves_nested() {
        let doc = json!({"operational": {"recommended_images": ["a", "b"]}});
        let p: FieldPath = "operational.recommended_images[1]".parse().unwrap();
        assert_eq!(p.resolve(&doc), Some(&json!("b")));
        let missing: FieldPath = "operational.recommended_images[2]".parse().unwrap();
        assert_eq!(missing.resolve(&doc), None);
    }

    #[test]
    fn wildcard_expands() {
        let doc = json!({"latency": {"a": 1, "b": 2}});
        let p: FieldPath = "latency.*".parse().unwrap();
        assert_eq!(p.resolve_all(&doc).len(), 2);
    }
}
