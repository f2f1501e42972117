use serde::{Deserialize, Serialize};

use super::{Direction, Skill};
use crate::operator::Delivery;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CompositionVerdict {
    Connector {
        connector: String,
        /// System whose compositions block carries the entry.
        declared_by: String,
        entry_index: usize,
        direction: Direction,
        semantics: Delivery,
        advisories: Vec<String>,
    },
    NoDeclaredConnector {
        producer: String,
        consumer: String,
    },
}

impl CompositionVerdict {
    pub fn connector(&self) -> Option<&str> {
        match self {
            CompositionVerdict::Connector { connector, .. } => Some(connector),
            CompositionVerdict::NoDeclaredConnector { .. } => None,
        }
    }

    /// Skill field path of the declaring entry, e.g.
    /// `clickhouse.compositions[0]`.
    pub fn citation(&self) -> Option<String> {
        match self {
            CompositionVerdict::Connector {
                declared_by,
                entry_index,
                ..
            } => Some(format!("{declared_by}.compositions[{entry_index}]")),
            CompositionVerdict::NoDeclaredConnector { .. } => None,
        }
    }
}

/// Looks for a connector carrying data `producer -> consumer`.
///
/// The consumer's inbound (or bidirectional) entry for the producer is
/// consulted first, then the producer's outbound (or bidirectional) entry
/// for the consumer.
pub fn check_composition(producer: &Skill, consumer: &Skill) -> CompositionVerdict {
    let inbound = consumer
        .compositions
        .iter()
        .enumerate()
        .find(|(_, c)| {
            c.with == producer.system
                && matches!(c.direction, Direction::Inbound | Direction::Bidirectional)
        })
        .map(|(i, c)| (&consumer.system, i, c));
    let outbound = || {
        producer
            .compositions
            .iter()
            .enumerate()
            .find(|(_, c)| {
                c.with == consumer.system
                    && matches!(c.direction, Direction::Outbound | Direction::Bidirectional)
            })
            .map(|(i, c)| (&producer.system, i, c))
    };
    match inbound.or_else(outbound) {
        Some((by, i, c)) => CompositionVerdict::Connector {
            connector: c.connector.clone(),
            declared_by: by.clone(),
            entry_index: i,
            direction: c.direction,
            semantics: c.semantics,
            advisories: c.known_issues.clone(),
        },
        None => CompositionVerdict::NoDeclaredConnector {
            producer: producer.system.clone(),
            consumer: consumer.system.clone(),
        },
    }
}
