//! One live campaign as a fold over its events.
//!
//! Every mutation is first turned into an event, checked against the current
//! state, appended to the log and only then applied. Replay applies the same
//! events through the same code, so a restarted campaign is indistinguishable
//! from the one that wrote the log.

use std::collections::HashSet;
use std::sync::Arc;

use spade_core::simulator::{cycle_rng, endpoint_value, CampaignState};
use spade_core::Pool;

use crate::api::{
    CampaignSummary, CreateCampaignRequest, CycleStatus, CycleSummary, EndpointProgress, ObservationInput,
    PendingBatch, SubmitResultsRequest, SuggestResponse, TopEntry, SCHEMA_VERSION,
};
use crate::events::{BatchSuggested, CampaignEvent, EventPayload, ResultsSubmitted};
use crate::ServiceError;

/// Minimum length of the top table in summaries.
const TOP_ROWS: usize = 10;

#[derive(Debug, Clone)]
struct Pending {
    cycle: usize,
    batch: Vec<usize>,
    awaiting: Vec<usize>,
}

impl Pending {
    fn untouched(&self) -> bool {
        self.awaiting.len() == self.batch.len()
    }
}

/// Outcome of [`Campaign::prepare_suggest`].
#[derive(Debug)]
pub enum Suggestion {
    /// A new batch, to be logged and applied.
    New(CampaignEvent),
    /// The pending batch, unchanged; nothing to log.
    Repeat(SuggestResponse),
}

#[derive(Debug, Clone)]
pub struct Campaign {
    id: String,
    request: CreateCampaignRequest,
    state: CampaignState,
    pending: Option<Pending>,
    suggestions: usize,
    cycles: Vec<CycleSummary>,
    off_batch: Vec<ObservationInput>,
    reached: Vec<Option<usize>>,
    next_seq: u64,
}

impl Campaign {
    /// Builds a campaign from its Created event.
    fn from_created(id: &str, event: &CampaignEvent) -> Result<Self, ServiceError> {
        let EventPayload::Created(request) = &event.payload else {
            return Err(ServiceError::Replay(format!("campaign {id}: first event is not Created")));
        };
        if event.seq != 0 {
            return Err(ServiceError::Replay(format!("campaign {id}: Created has seq {}", event.seq)));
        }
        let pool = request.validate()?;
        Ok(Campaign {
            id: id.to_string(),
            reached: vec![None; request.endpoints.len()],
            request: (**request).clone(),
            state: CampaignState::new(Arc::new(pool)),
            pending: None,
            suggestions: 0,
            cycles: Vec::new(),
            off_batch: Vec::new(),
            next_seq: 1,
        })
    }

    /// Validates a creation request and returns the campaign with its first event.
    pub fn create(id: &str, request: CreateCampaignRequest) -> Result<(Self, CampaignEvent), ServiceError> {
        request.validate()?;
        let event = CampaignEvent::new(0, EventPayload::Created(Box::new(request)));
        let campaign = Campaign::from_created(id, &event)?;
        Ok((campaign, event))
    }

    /// Reconstructs a campaign by folding its events in order.
    pub fn replay(id: &str, events: &[CampaignEvent]) -> Result<Self, ServiceError> {
        let first = events
            .first()
            .ok_or_else(|| ServiceError::Replay(format!("campaign {id}: empty event log")))?;
        let mut c = Campaign::from_created(id, first)?;
        for e in &events[1..] {
            c.apply(e)?;
        }
        Ok(c)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pool(&self) -> &Arc<Pool> {
        self.state.pool()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    fn index(&self, ligand_id: &str) -> Result<usize, ServiceError> {
        self.pool()
            .index_of(ligand_id)
            .ok_or_else(|| ServiceError::UnknownLigand(ligand_id.to_string()))
    }

    /// Applies one logged event. Fails, leaving the state untouched, if the
    /// event is out of sequence or inconsistent with the state.
    pub fn apply(&mut self, event: &CampaignEvent) -> Result<(), ServiceError> {
        if event.seq != self.next_seq {
            return Err(ServiceError::Replay(format!(
                "campaign {}: expected seq {}, found {}",
                self.id, self.next_seq, event.seq
            )));
        }
        match &event.payload {
            EventPayload::Created(_) => {
                return Err(ServiceError::Replay(format!("campaign {}: second Created event", self.id)));
            }
            EventPayload::BatchSuggested(b) => self.apply_suggested(b)?,
            EventPayload::ResultsSubmitted(r) => self.apply_results(r)?,
        }
        self.next_seq += 1;
        Ok(())
    }

    fn apply_suggested(&mut self, b: &BatchSuggested) -> Result<(), ServiceError> {
        if b.cycle != self.suggestions {
            return Err(ServiceError::Replay(format!(
                "campaign {}: suggestion {} logged as cycle {}",
                self.id, self.suggestions, b.cycle
            )));
        }
        let batch = b.ligand_ids.iter().map(|id| self.index(id)).collect::<Result<Vec<_>, _>>()?;
        let credited = b.credited.iter().map(|id| self.index(id)).collect::<Result<Vec<_>, _>>()?;
        if let Some(&i) = batch.iter().find(|&&i| self.state.is_tested(i)) {
            return Err(ServiceError::DuplicateObservation(self.pool().id(i).to_string()));
        }
        if let Some(old) = self.pending.take() {
            self.cycles[old.cycle].status = CycleStatus::Superseded;
        }
        self.state.credit(&credited);
        self.cycles.push(CycleSummary {
            cycle: b.cycle,
            suggested: b.ligand_ids.clone(),
            results: Vec::new(),
            status: CycleStatus::Pending,
        });
        self.pending = Some(Pending {
            cycle: b.cycle,
            awaiting: batch.clone(),
            batch,
        });
        self.suggestions += 1;
        Ok(())
    }

    /// Resolves and checks a submission without changing any state.
    fn check_results(&self, observations: &[ObservationInput], off_batch: bool) -> Result<Vec<(usize, f64)>, ServiceError> {
        if observations.is_empty() {
            return Err(ServiceError::InvalidRequest("no results submitted".into()));
        }
        let mut seen_now = HashSet::new();
        let mut resolved = Vec::with_capacity(observations.len());
        for o in observations {
            let i = self.index(&o.ligand_id)?;
            if !o.pic.is_finite() {
                return Err(ServiceError::NonFinitePic {
                    ligand_id: o.ligand_id.clone(),
                });
            }
            if self.state.is_tested(i) || !seen_now.insert(i) {
                return Err(ServiceError::DuplicateObservation(o.ligand_id.clone()));
            }
            let in_batch = self.pending.as_ref().is_some_and(|p| p.awaiting.contains(&i));
            if !in_batch && !off_batch {
                return Err(ServiceError::NotInBatch(o.ligand_id.clone()));
            }
            resolved.push((i, o.pic));
        }
        Ok(resolved)
    }

    fn apply_results(&mut self, r: &ResultsSubmitted) -> Result<(), ServiceError> {
        let resolved = self.check_results(&r.observations, r.off_batch)?;
        self.state.observe(&resolved);
        for ((i, _), o) in resolved.iter().zip(&r.observations) {
            match self.pending.as_mut() {
                Some(p) if p.awaiting.contains(i) => {
                    p.awaiting.retain(|a| a != i);
                    self.cycles[p.cycle].results.push(o.clone());
                }
                _ => self.off_batch.push(o.clone()),
            }
        }
        if let Some(p) = self.pending.as_ref().filter(|p| p.awaiting.is_empty()) {
            self.cycles[p.cycle].status = CycleStatus::Complete;
            self.pending = None;
        }
        let pics = self.state.seen_pics();
        let tested = pics.len();
        for (r, e) in self.reached.iter_mut().zip(&self.request.endpoints) {
            if r.is_none() && endpoint_value(&pics, e).is_some_and(|v| v >= e.target) {
                *r = Some(tested);
            }
        }
        Ok(())
    }

    fn suggest_response(&self, p: &Pending, repeated: bool) -> SuggestResponse {
        SuggestResponse {
            schema_version: SCHEMA_VERSION,
            campaign_id: self.id.clone(),
            cycle: p.cycle,
            batch: p.batch.iter().map(|&i| self.pool().id(i).to_string()).collect(),
            repeated,
        }
    }

    /// Computes the next batch.
    ///
    /// A pending batch with no results yet is returned as is. One with partial
    /// results is a conflict unless `force` is set, in which case it is
    /// superseded by a fresh suggestion.
    pub fn prepare_suggest(&self, force: bool) -> Result<Suggestion, ServiceError> {
        if let Some(p) = &self.pending {
            if p.untouched() && !force {
                return Ok(Suggestion::Repeat(self.suggest_response(p, true)));
            }
            if !force {
                return Err(ServiceError::PendingBatch {
                    awaiting: p.awaiting.iter().map(|&i| self.pool().id(i).to_string()).collect(),
                });
            }
        }
        let rest = self.state.rest();
        if rest.is_empty() {
            return Err(ServiceError::Exhausted);
        }
        // Ligands of a superseded batch may be suggested again.
        let b = self.request.config.batch_size.min(rest.len());
        let mut rng = cycle_rng(self.request.seed, self.suggestions);
        let proposal = self
            .request
            .policy
            .propose(&self.state.view(), &self.request.config, b, &mut rng)?;
        let ids = |v: &[usize]| v.iter().map(|&i| self.pool().id(i).to_string()).collect();
        Ok(Suggestion::New(CampaignEvent::new(
            self.next_seq,
            EventPayload::BatchSuggested(BatchSuggested {
                cycle: self.suggestions,
                ligand_ids: ids(&proposal.batch),
                credited: ids(&proposal.credited),
            }),
        )))
    }

    /// Response for the batch that the last applied suggestion created.
    pub fn current_suggestion(&self) -> Option<SuggestResponse> {
        self.pending.as_ref().map(|p| self.suggest_response(p, false))
    }

    /// Checks a submission and returns the event to log.
    pub fn prepare_results(&self, req: &SubmitResultsRequest) -> Result<CampaignEvent, ServiceError> {
        crate::api::check_version(req.schema_version)?;
        self.check_results(&req.results, req.off_batch)?;
        Ok(CampaignEvent::new(
            self.next_seq,
            EventPayload::ResultsSubmitted(ResultsSubmitted {
                observations: req.results.clone(),
                off_batch: req.off_batch,
            }),
        ))
    }

    pub fn summary(&self) -> CampaignSummary {
        let pool = self.pool();
        let seen = self.state.seen();
        let mut ranked: Vec<(usize, f64)> = seen.to_vec();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| pool.id(a.0).cmp(pool.id(b.0))));
        let rows = self
            .request
            .endpoints
            .iter()
            .map(|e| e.k)
            .max()
            .unwrap_or(0)
            .max(TOP_ROWS);
        let top = ranked
            .iter()
            .take(rows)
            .enumerate()
            .map(|(r, (i, pic))| TopEntry {
                rank: r + 1,
                ligand_id: pool.id(*i).to_string(),
                pic: *pic,
            })
            .collect();
        let pics = self.state.seen_pics();
        let endpoints = self
            .request
            .endpoints
            .iter()
            .zip(&self.reached)
            .map(|(e, r)| EndpointProgress {
                label: e.label(),
                endpoint: *e,
                value: endpoint_value(&pics, e),
                reached: r.is_some(),
                reached_after: *r,
            })
            .collect();
        CampaignSummary {
            schema_version: SCHEMA_VERSION,
            campaign_id: self.id.clone(),
            policy: self.request.policy,
            config: self.request.config.clone(),
            seed: self.request.seed,
            pool_size: pool.len(),
            seen_count: seen.len(),
            remaining: self.state.rest().len(),
            pending_batch: self.pending.as_ref().map(|p| PendingBatch {
                cycle: p.cycle,
                ligand_ids: p.batch.iter().map(|&i| pool.id(i).to_string()).collect(),
                awaiting: p.awaiting.iter().map(|&i| pool.id(i).to_string()).collect(),
            }),
            top,
            endpoints,
            cycles: self.cycles.clone(),
            off_batch_results: self.off_batch.clone(),
            last_seq: self.next_seq - 1,
        }
    }
}
