//! The set of campaigns under one data directory.
//!
//! Each campaign sits behind its own lock together with its log handle, so
//! mutations of one campaign are serialized while different campaigns proceed
//! independently. Reads take the same lock shared.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crate::api::{CampaignSummary, CreateCampaignRequest, SubmitResultsRequest, SuggestResponse};
use crate::campaign::{Campaign, Suggestion};
use crate::events::{read_events, CampaignEvent, EventLog};
use crate::ServiceError;

const LOG_EXTENSION: &str = "ndjson";

#[derive(Debug)]
struct Entry {
    campaign: Campaign,
    log: EventLog,
}

type Shared = Arc<RwLock<Entry>>;

#[derive(Debug)]
pub struct CampaignStore {
    dir: PathBuf,
    campaigns: RwLock<BTreeMap<String, Shared>>,
    /// Serializes id allocation and log creation.
    create_lock: Mutex<u64>,
}

fn lock_poisoned() -> ServiceError {
    ServiceError::Io(std::io::Error::other("campaign lock poisoned"))
}

impl CampaignStore {
    /// Opens `dir`, creating it if needed, and replays every campaign log in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == LOG_EXTENSION))
            .collect();
        paths.sort();
        let mut campaigns = BTreeMap::new();
        let mut max_id = 0;
        for path in paths {
            let id = campaign_id(&path)?;
            let (log, events) = EventLog::open(&path)?;
            let campaign = Campaign::replay(&id, &events)?;
            if let Some(n) = id.strip_prefix('c').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            tracing::info!(campaign = %id, events = events.len(), "replayed campaign");
            campaigns.insert(id, Arc::new(RwLock::new(Entry { campaign, log })));
        }
        Ok(CampaignStore {
            dir,
            campaigns: RwLock::new(campaigns),
            create_lock: Mutex::new(max_id),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{LOG_EXTENSION}"))
    }

    fn get(&self, id: &str) -> Result<Shared, ServiceError> {
        self.campaigns
            .read()
            .map_err(|_| lock_poisoned())?
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownCampaign(id.to_string()))
    }

    pub fn list(&self) -> Vec<String> {
        self.campaigns.read().map(|m| m.keys().cloned().collect()).unwrap_or_default()
    }

    pub fn create(&self, request: CreateCampaignRequest) -> Result<CampaignSummary, ServiceError> {
        let mut counter = self.create_lock.lock().map_err(|_| lock_poisoned())?;
        let id = format!("c{:06}", *counter + 1);
        let (campaign, event) = Campaign::create(&id, request)?;
        let mut log = EventLog::create(self.log_path(&id))?;
        if let Err(e) = log.append(&event) {
            let _ = fs::remove_file(log.path());
            return Err(e);
        }
        *counter += 1;
        let summary = campaign.summary();
        self.campaigns
            .write()
            .map_err(|_| lock_poisoned())?
            .insert(id, Arc::new(RwLock::new(Entry { campaign, log })));
        Ok(summary)
    }

    /// Next batch for a campaign; see [`Campaign::prepare_suggest`].
    pub fn suggest(&self, id: &str, force: bool) -> Result<SuggestResponse, ServiceError> {
        let shared = self.get(id)?;
        let mut entry = shared.write().map_err(|_| lock_poisoned())?;
        match entry.campaign.prepare_suggest(force)? {
            Suggestion::Repeat(r) => Ok(r),
            Suggestion::New(event) => {
                commit(&mut entry, &event)?;
                Ok(entry.campaign.current_suggestion().expect("suggestion just applied"))
            }
        }
    }

    pub fn submit(&self, id: &str, request: &SubmitResultsRequest) -> Result<CampaignSummary, ServiceError> {
        let shared = self.get(id)?;
        let mut entry = shared.write().map_err(|_| lock_poisoned())?;
        let event = entry.campaign.prepare_results(request)?;
        commit(&mut entry, &event)?;
        Ok(entry.campaign.summary())
    }

    pub fn summary(&self, id: &str) -> Result<CampaignSummary, ServiceError> {
        let shared = self.get(id)?;
        let entry = shared.read().map_err(|_| lock_poisoned())?;
        Ok(entry.campaign.summary())
    }

    /// Events as persisted, read back from the log file.
    pub fn events(&self, id: &str) -> Result<Vec<CampaignEvent>, ServiceError> {
        let shared = self.get(id)?;
        let entry = shared.read().map_err(|_| lock_poisoned())?;
        read_events(entry.log.path())
    }
}

/// Persists an event, then applies it.
fn commit(entry: &mut Entry, event: &CampaignEvent) -> Result<(), ServiceError> {
    let mut next = entry.campaign.clone();
    next.apply(event)?;
    entry.log.append(event)?;
    entry.campaign = next;
    Ok(())
}

fn campaign_id(path: &Path) -> Result<String, ServiceError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| ServiceError::Replay(format!("bad log file name {}", path.display())))
}
