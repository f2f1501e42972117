//! Timestamp source. Every timestamp written by the pipeline goes through a
//! [`Clock`] so that runs can be pinned for byte-stable output.

use chrono::{SecondsFormat, Utc};

pub trait Clock {
    /// RFC 3339 timestamp.
    fn now(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl FixedClock {
    pub fn epoch() -> Self {
        Self("1970-01-01T00:00:00Z".to_string())
    }
}

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}
