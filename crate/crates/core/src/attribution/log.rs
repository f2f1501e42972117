use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributionRecord, Outcome, ProposedAction, RuntimeSignal};
use crate::render::ArtifactSet;
use crate::skill::SkillCatalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Attribution {
        cycle: u32,
        signal: RuntimeSignal,
        record: AttributionRecord,
        outcome: Outcome,
    },
    /// A field patched in an earlier cycle, now cited by a rendered artifact.
    Citation {
        cycle: u32,
        patch_id: String,
        citation: String,
        artifact: String,
        line: usize,
    },
}

/// Append-only; persisted as one JSON object per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttributionLog {
    events: Vec<LogEvent>,
}

impl AttributionLog {
    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn extend(&mut self, events: impl IntoIterator<Item = LogEvent>) {
        self.events.extend(events);
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { events })
    }

    pub fn to_jsonl(&self) -> String {
        to_jsonl(&self.events)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e),
        }
    }

    /// Appends `events` to the file at `path`, creating it if needed.
    pub fn append_to(path: &Path, events: &[LogEvent]) -> io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(to_jsonl(events).as_bytes())
    }

    /// Applied patches that no citation event refers to yet.
    pub fn unlinked_patches(&self) -> Vec<&AttributionRecord> {
        let linked: Vec<&str> = self
            .events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Citation { patch_id, .. } => Some(patch_id.as_str()),
                _ => None,
            })
            .collect();
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Attribution {
                    record,
                    outcome: Outcome::PatchApplied { patch_id, .. },
                    ..
                } if !linked.contains(&patch_id.as_str()) => Some(record),
                _ => None,
            })
            .collect()
    }
}

fn to_jsonl(events: &[LogEvent]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("log event serializes") + "\n")
        .collect()
}

/// Citation events for every earlier patch whose added entry is now cited
/// in `artifacts`. An entry is matched by resolving each citation under the
/// patched field against `catalog` and comparing with the patch value.
pub fn link_citations(log: &AttributionLog, artifacts: &ArtifactSet, catalog: &SkillCatalog, cycle: u32) -> Vec<LogEvent> {
    let mut out = Vec::new();
    for record in log.unlinked_patches() {
        let ProposedAction::SkillPatch { patch } = &record.proposed_action else {
            continue;
        };
        let field = patch.field();
        let hit = artifacts.citation_index.iter().find(|c| {
            let under = c
                .citation
                .strip_prefix(&field)
                .is_some_and(|rest| rest.is_empty() || rest.starts_with('['));
            under && catalog.resolve(&c.citation).is_some_and(|v| v == patch.value)
        });
        if let Some(c) = hit {
            out.push(LogEvent::Citation {
                cycle,
                patch_id: patch.id(),
                citation: c.citation.clone(),
                artifact: c.artifact.clone(),
                line: c.line,
            });
        }
    }
    out
}
