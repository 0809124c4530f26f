//! Append-only JSONL record of curriculum and update events, enough to replay
//! the stop-gradient and buffer-dominance checks after a run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::sampler::EpisodeMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AuditEvent {
    Episode {
        episode: u64,
        mode: EpisodeMode,
        level: String,
        score: Option<f64>,
    },
    Buffer {
        episode: u64,
        level: String,
        score: f64,
        outcome: String,
        evicted: Option<String>,
        evicted_score: Option<f64>,
        /// Lowest retained score right after the event.
        min_retained: Option<f64>,
    },
    Update {
        update: u64,
        episodes: Vec<u64>,
        samples: usize,
    },
}

#[derive(Default)]
pub struct AuditLog {
    writer: Option<BufWriter<File>>,
    keep: bool,
    events: Vec<AuditEvent>,
}

impl AuditLog {
    /// Discards everything.
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn in_memory() -> Self {
        AuditLog {
            keep: true,
            ..Self::default()
        }
    }

    pub fn to_file(path: &Path, keep: bool) -> Result<Self> {
        Ok(AuditLog {
            writer: Some(BufWriter::new(File::create(path)?)),
            keep,
            events: Vec::new(),
        })
    }

    pub fn record(&mut self, ev: AuditEvent) -> Result<()> {
        if let Some(w) = &mut self.writer {
            serde_json::to_writer(&mut *w, &ev)?;
            w.write_all(b"\n")?;
        }
        if self.keep {
            self.events.push(ev);
        }
        Ok(())
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<AuditEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(w) = &mut self.writer {
            w.flush()?;
        }
        Ok(())
    }
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditEvent>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
