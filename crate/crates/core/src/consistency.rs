//! Consistency levels and the ordered lattice used to compare them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A named consistency level. Ordering lives in [`ConsistencyLattice`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConsistencyLevel(String);

impl ConsistencyLevel {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn strong() -> Self {
        Self::new("strong")
    }

    pub fn eventual() -> Self {
        Self::new("eventual")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConsistencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ConsistencyLevel {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("consistency level `{0}` is already registered")]
    Duplicate(String),
    #[error("unknown consistency level `{0}`")]
    Unknown(String),
}

/// Totally ordered levels, weakest first. The default is `eventual < strong`;
/// intermediate levels may be registered between existing ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyLattice {
    levels: Vec<ConsistencyLevel>,
}

impl Default for ConsistencyLattice {
    fn default() -> Self {
        Self {
            levels: vec![ConsistencyLevel::eventual(), ConsistencyLevel::strong()],
        }
    }
}

impl ConsistencyLattice {
    /// Registers `level` directly above `below`.
    pub fn register_above(
        &mut self,
        level: ConsistencyLevel,
        below: &ConsistencyLevel,
    ) -> Result<(), LatticeError> {
        if self.contains(&level) {
            return Err(LatticeError::Duplicate(level.0));
        }
        let pos = self
            .rank(below)
            .ok_or_else(|| LatticeError::Unknown(below.0.clone()))?;
        self.levels.insert(pos + 1, level);
        Ok(())
    }

    pub fn contains(&self, level: &ConsistencyLevel) -> bool {
        self.levels.contains(level)
    }

    pub fn rank(&self, level: &ConsistencyLevel) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn weakest(&self) -> &ConsistencyLevel {
        &self.levels[0]
    }

    pub fn strongest(&self) -> &ConsistencyLevel {
        self.levels.last().expect("lattice is never empty")
    }

    /// `a >= b`. Unknown levels compare as unsatisfied.
    pub fn at_least(&self, a: &ConsistencyLevel, b: &ConsistencyLevel) -> bool {
        match (self.rank(a), self.rank(b)) {
            (Some(x), Some(y)) => x >= y,
            _ => false,
        }
    }

    /// Greatest lower bound; unknown levels sink to the bottom.
    pub fn meet<'a>(&self, a: &'a ConsistencyLevel, b: &'a ConsistencyLevel) -> &'a ConsistencyLevel {
        match (self.rank(a), self.rank(b)) {
            (Some(x), Some(y)) if x <= y => a,
            (Some(_), Some(_)) => b,
            (None, _) => a,
            (_, None) => b,
        }
    }

    pub fn meet_all<'a, I>(&self, levels: I) -> Option<ConsistencyLevel>
    where
        I: IntoIterator<Item = &'a ConsistencyLevel>,
    {
        levels
            .into_iter()
            .fold(None::<&ConsistencyLevel>, |acc, l| match acc {
                None => Some(l),
                Some(a) => Some(self.meet(a, l)),
            })
            .cloned()
    }

    pub fn levels(&self) -> &[ConsistencyLevel] {
        &self.levels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_order() {
        let l = ConsistencyLattice::default();
        assert!(l.at_least(&ConsistencyLevel::strong(), &ConsistencyLevel::eventual()));
        assert!(!l.at_least(&ConsistencyLevel::eventual(), &ConsistencyLevel::strong()));
        assert_eq!(
            l.meet_all([&ConsistencyLevel::strong(), &ConsistencyLevel::eventual()]),
            Some(ConsistencyLevel::eventual())
        );
    }

    #[test]
    fn intermediate_level() {
        let mut l = ConsistencyLattice::default();
        let causal = ConsistencyLevel::new("causal");
        l.register_above(causal.clone(), &ConsistencyLevel::eventual()).unwrap();
        assert!(l.at_least(&causal, &ConsistencyLevel::eventual()));
        assert!(l.at_least(&ConsistencyLevel::strong(), &causal));
        assert_eq!(
            l.register_above(causal.clone(), &ConsistencyLevel::eventual()),
            Err(LatticeError::Duplicate("causal".into()))
        );
    }
}
