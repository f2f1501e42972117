use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::ConsistencyLattice;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OperatorType(String);

impl OperatorType {
    pub const INGEST: &'static str = "INGEST";
    pub const STORE: &'static str = "STORE";
    pub const TRANSFORM: &'static str = "TRANSFORM";
    pub const SERVE: &'static str = "SERVE";
    pub const CACHE: &'static str = "CACHE";
    pub const QUEUE: &'static str = "QUEUE";

    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is(&self, name: &str) -> bool {
        self.0 == name
    }
}

impl fmt::Display for OperatorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OperatorType {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorTypeDef {
    pub name: OperatorType,
    pub inbound: BTreeSet<OperatorType>,
    pub outbound: BTreeSet<OperatorType>,
    pub terminal: bool,
}

impl OperatorTypeDef {
    pub fn new(name: &str, inbound: &[&str], outbound: &[&str], terminal: bool) -> Self {
        Self {
            name: name.into(),
            inbound: inbound.iter().map(|s| OperatorType::new(*s)).collect(),
            outbound: outbound.iter().map(|s| OperatorType::new(*s)).collect(),
            terminal,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("operator type `{0}` is already registered with a different definition")]
    Conflict(String),
    #[error("operator type name `{0}` is not a valid identifier")]
    InvalidName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Registration {
    Added,
    Unchanged,
}

/// Operator types known to the type checker.
///
/// An edge `A -> B` is allowed when `A` lists `B` as outbound or `B` lists
/// `A` as inbound. Extensions therefore only need to declare their own
/// pairings against existing types.
#[derive(Debug, Clone)]
pub struct OperatorTypeRegistry {
    types: BTreeMap<OperatorType, OperatorTypeDef>,
    lattice: ConsistencyLattice,
}

impl Default for OperatorTypeRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl OperatorTypeRegistry {
    pub fn new() -> Self {
        use OperatorType as T;
        let base = [
            OperatorTypeDef::new(T::INGEST, &[], &[T::QUEUE, T::TRANSFORM, T::STORE, T::CACHE], false),
            OperatorTypeDef::new(
                T::QUEUE,
                &[T::INGEST, T::TRANSFORM],
                &[T::TRANSFORM, T::STORE, T::CACHE, T::SERVE],
                false,
            ),
            OperatorTypeDef::new(
                T::TRANSFORM,
                &[T::INGEST, T::QUEUE, T::STORE],
                &[T::STORE, T::CACHE, T::QUEUE, T::SERVE],
                false,
            ),
            OperatorTypeDef::new(
                T::STORE,
                &[T::INGEST, T::QUEUE, T::TRANSFORM],
                &[T::TRANSFORM, T::CACHE, T::SERVE],
                true,
            ),
            OperatorTypeDef::new(
                T::CACHE,
                &[T::INGEST, T::QUEUE, T::TRANSFORM, T::STORE],
                &[T::SERVE],
                true,
            ),
            OperatorTypeDef::new(T::SERVE, &[T::QUEUE, T::TRANSFORM, T::STORE, T::CACHE], &[], true),
        ];
        Self {
            types: base.into_iter().map(|d| (d.name.clone(), d)).collect(),
            lattice: ConsistencyLattice::default(),
        }
    }

    pub fn register(&mut self, def: OperatorTypeDef) -> Result<Registration, RegistryError> {
        let name = def.name.as_str();
        let valid = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err(RegistryError::InvalidName(name.to_string()));
        }
        match self.types.get(&def.name) {
            Some(existing) if *existing == def => Ok(Registration::Unchanged),
            Some(_) => Err(RegistryError::Conflict(name.to_string())),
            None => {
                self.types.insert(def.name.clone(), def);
                Ok(Registration::Added)
            }
        }
    }

    /// Consuming form of [`register`](Self::register).
    pub fn register_operator_type(
        mut self,
        name: &str,
        inbound: &[&str],
        outbound: &[&str],
        terminal: bool,
    ) -> Result<Self, RegistryError> {
        self.register(OperatorTypeDef::new(name, inbound, outbound, terminal))?;
        Ok(self)
    }

    pub fn get(&self, t: &OperatorType) -> Option<&OperatorTypeDef> {
        self.types.get(t)
    }

    pub fn contains(&self, t: &OperatorType) -> bool {
        self.types.contains_key(t)
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.types.contains_key(&OperatorType::new(name))
    }

    pub fn is_terminal(&self, t: &OperatorType) -> bool {
        self.types.get(t).map(|d| d.terminal).unwrap_or(false)
    }

    pub fn allows_edge(&self, from: &OperatorType, to: &OperatorType) -> bool {
        let out = self
            .types
            .get(from)
            .map(|d| d.outbound.contains(to))
            .unwrap_or(false);
        let inb = self
            .types
            .get(to)
            .map(|d| d.inbound.contains(from))
            .unwrap_or(false);
        out || inb
    }

    pub fn types(&self) -> impl Iterator<Item = &OperatorTypeDef> {
        self.types.values()
    }

    pub fn lattice(&self) -> &ConsistencyLattice {
        &self.lattice
    }

    pub fn lattice_mut(&mut self) -> &mut ConsistencyLattice {
        &mut self.lattice
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_types_present() {
        let r = OperatorTypeRegistry::new();
        for t in ["INGEST", "STORE", "TRANSFORM", "SERVE", "CACHE", "QUEUE"] {
            assert!(r.contains_name(t));
        }
    }

    #[test]
    fn identical_reregistration_is_noop() {
        let mut r = OperatorTypeRegistry::new();
        let queue = r.get(&"QUEUE".into()).unwrap().clone();
        assert_eq!(r.register(queue), Ok(Registration::Unchanged));
    }

    #[test]
    fn conflicting_reregistration_fails() {
        let mut r = OperatorTypeRegistry::new();
        let err = r
            .register(OperatorTypeDef::new("QUEUE", &[], &[], true))
            .unwrap_err();
        assert_eq!(err, RegistryError::Conflict("QUEUE".into()));
    }

    #[test]
    fn extension_pairings_either_side() {
        let r = OperatorTypeRegistry::new()
            .register_operator_type("ROUTE", &["QUEUE", "INGEST"], &["STORE", "NOTIFY", "SERVE"], false)
            .unwrap();
        assert!(r.allows_edge(&"QUEUE".into(), &"ROUTE".into()));
        assert!(r.allows_edge(&"ROUTE".into(), &"STORE".into()));
        assert!(!r.allows_edge(&"ROUTE".into(), &"CACHE".into()));
        assert!(!r.allows_edge(&"INGEST".into(), &"SERVE".into()));
    }

    #[test]
    fn rejects_bad_names() {
        let mut r = OperatorTypeRegistry::new();
        assert!(r.register(OperatorTypeDef::new("route", &[], &[], false)).is_err());
    }
}
