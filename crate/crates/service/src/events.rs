//! Campaign events and their newline-delimited JSON log.
//!
//! One file per campaign. Every append is followed by `fsync`, so an event
//! that was acknowledged survives a crash. A torn final line (a write that
//! never reached its newline) is discarded on open.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::api::{CreateCampaignRequest, ObservationInput};
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Created,
    BatchSuggested,
    ResultsSubmitted,
}

/// Serialized without a tag; `kind` on the enclosing event says which it is.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EventPayload {
    Created(Box<CreateCampaignRequest>),
    BatchSuggested(BatchSuggested),
    ResultsSubmitted(ResultsSubmitted),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSuggested {
    /// Zero-based suggestion counter; also selects the random stream.
    pub cycle: usize,
    pub ligand_ids: Vec<String>,
    /// Anchor credited with each suggested ligand; empty for non-SPADE policies.
    #[serde(default)]
    pub credited: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsSubmitted {
    pub observations: Vec<ObservationInput>,
    /// Set when the ligands were tested outside the pending batch.
    #[serde(default)]
    pub off_batch: bool,
}

/// One log record: `{"seq":…,"kind":…,"timestamp_ms":…,"payload":{…}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub timestamp_ms: u64,
    pub payload: EventPayload,
}

/// Wire form, decoded in two steps so the payload shape follows `kind`.
#[derive(Deserialize)]
struct RawEvent {
    seq: u64,
    kind: EventKind,
    timestamp_ms: u64,
    payload: serde_json::Value,
}

impl<'de> Deserialize<'de> for CampaignEvent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawEvent::deserialize(d)?;
        let payload = match raw.kind {
            EventKind::Created => EventPayload::Created(serde_json::from_value(raw.payload).map_err(D::Error::custom)?),
            EventKind::BatchSuggested => {
                EventPayload::BatchSuggested(serde_json::from_value(raw.payload).map_err(D::Error::custom)?)
            }
            EventKind::ResultsSubmitted => {
                EventPayload::ResultsSubmitted(serde_json::from_value(raw.payload).map_err(D::Error::custom)?)
            }
        };
        Ok(CampaignEvent {
            seq: raw.seq,
            kind: raw.kind,
            timestamp_ms: raw.timestamp_ms,
            payload,
        })
    }
}

impl CampaignEvent {
    pub fn new(seq: u64, payload: EventPayload) -> Self {
        let kind = match &payload {
            EventPayload::Created(_) => EventKind::Created,
            EventPayload::BatchSuggested(_) => EventKind::BatchSuggested,
            EventPayload::ResultsSubmitted(_) => EventKind::ResultsSubmitted,
        };
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        CampaignEvent {
            seq,
            kind,
            timestamp_ms,
            payload,
        }
    }
}

/// Append handle on one campaign's log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Creates a new, empty log; fails if the file exists.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let path = path.into();
        let file = OpenOptions::new().append(true).create_new(true).open(&path)?;
        if let Some(dir) = path.parent() {
            sync_dir(dir);
        }
        Ok(EventLog { path, file })
    }

    /// Opens an existing log and returns its events, dropping a torn last line.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, Vec<CampaignEvent>), ServiceError> {
        let path = path.into();
        let mut bytes = Vec::new();
        File::open(&path)?.read_to_end(&mut bytes)?;
        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if complete < bytes.len() {
            tracing::warn!(
                path = %path.display(),
                dropped = bytes.len() - complete,
                "discarding torn final event"
            );
            OpenOptions::new().write(true).open(&path)?.set_len(complete as u64)?;
        }
        let events = parse_events(&bytes[..complete], &path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((EventLog { path, file }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one event as a single line and syncs it to disk. On failure the
    /// file is cut back so no partial line precedes the next append.
    pub fn append(&mut self, event: &CampaignEvent) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let before = self.file.metadata()?.len();
        let written = self.file.write_all(&line).and_then(|_| self.file.sync_data());
        if let Err(e) = written {
            let _ = self.file.set_len(before);
            return Err(e.into());
        }
        Ok(())
    }
}

fn parse_events(bytes: &[u8], path: &Path) -> Result<Vec<CampaignEvent>, ServiceError> {
    let mut events = Vec::new();
    for (n, line) in bytes.split(|&b| b == b'\n').enumerate() {
        if line.is_empty() {
            continue;
        }
        let event: CampaignEvent = serde_json::from_slice(line).map_err(|e| ServiceError::CorruptLog {
            path: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Reads every complete event of a log without opening it for append.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<CampaignEvent>, ServiceError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    parse_events(&bytes[..complete], path)
}

fn sync_dir(dir: &Path) {
    // Best effort: not every platform can fsync a directory.
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Io(io::Error::other(e))
    }
}
