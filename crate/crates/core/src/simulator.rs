//! Seeded race-to-target campaigns against a ground-truth dataset.
//!
//! A campaign runs cycles of `b` tests. After each cycle the endpoint is
//! checked on the measured PICs; a campaign that has not reached it after
//! `cap` tests, or that runs out of ligands first, is a failure and scores `cap`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{CampaignView, HelpCounters, PolicyError, PolicyKind};
use crate::types::{Dataset, EndpointKind, EndpointSpec, PolicyConfig, Pool};

pub const DEFAULT_CAP: usize = 400;
pub const DEFAULT_REPLICATES: usize = 50;

/// One completed cycle: the tested ligand ids and their measured PICs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub batch: Vec<String>,
    pub pics: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("cycle {cycle}: {source}")]
    Policy {
        cycle: usize,
        #[source]
        source: PolicyError,
        cycles: Vec<CycleRecord>,
    },
    #[error("ligand {0} in cycle log is not in the dataset")]
    UnknownLigand(String),
    #[error("ligand {0} tested twice in cycle log")]
    DuplicateTest(String),
    #[error("at least one endpoint is required")]
    NoEndpoints,
}

/// Mutable state of one campaign: the seen/rest partition, help counters and
/// the cycle log.
#[derive(Debug, Clone)]
pub struct CampaignState {
    pool: Arc<Pool>,
    seen: Vec<(usize, f64)>,
    rest: Vec<usize>,
    tested: Vec<bool>,
    help: HelpCounters,
    cycles: Vec<CycleRecord>,
}

impl CampaignState {
    pub fn new(pool: Arc<Pool>) -> Self {
        let n = pool.len();
        CampaignState {
            seen: Vec::new(),
            rest: (0..n).collect(),
            tested: vec![false; n],
            help: HelpCounters::new(n),
            cycles: Vec::new(),
            pool,
        }
    }

    pub fn pool(&self) -> &Arc<Pool> {
        &self.pool
    }

    pub fn view(&self) -> CampaignView<'_> {
        CampaignView {
            pool: &self.pool,
            seen: &self.seen,
            rest: &self.rest,
            help: &self.help,
        }
    }

    pub fn seen(&self) -> &[(usize, f64)] {
        &self.seen
    }

    pub fn rest(&self) -> &[usize] {
        &self.rest
    }

    pub fn help(&self) -> &HelpCounters {
        &self.help
    }

    pub fn cycles(&self) -> &[CycleRecord] {
        &self.cycles
    }

    pub fn is_tested(&self, index: usize) -> bool {
        self.tested[index]
    }

    pub fn seen_pics(&self) -> Vec<f64> {
        self.seen.iter().map(|(_, p)| *p).collect()
    }

    /// Applies help credit for a suggested batch.
    pub fn credit(&mut self, anchors: &[usize]) {
        self.help.credit(anchors);
    }

    /// Records measurements for untested ligands without closing a cycle.
    /// Panics if a ligand was already tested; callers check first.
    pub fn observe(&mut self, results: &[(usize, f64)]) {
        for &(i, pic) in results {
            assert!(!self.tested[i], "ligand {} observed twice", self.pool.id(i));
            self.tested[i] = true;
            self.seen.push((i, pic));
        }
        let tested = &self.tested;
        self.rest.retain(|&i| !tested[i]);
    }

    /// Records a full cycle: observations plus a cycle-log entry.
    pub fn complete_cycle(&mut self, results: &[(usize, f64)]) {
        self.observe(results);
        self.cycles.push(CycleRecord {
            batch: results.iter().map(|(i, _)| self.pool.id(*i).to_string()).collect(),
            pics: results.iter().map(|(_, p)| *p).collect(),
        });
    }
}

/// Generator for one cycle of one campaign. Streams are independent, so a
/// cycle can be recomputed without replaying earlier draws.
pub fn cycle_rng(seed: u64, cycle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cycle as u64);
    rng
}

/// Current endpoint statistic: mean of the top `k` PICs, or the `k`-th best.
/// `None` until `k` ligands are seen.
pub fn endpoint_value(pics: &[f64], endpoint: &EndpointSpec) -> Option<f64> {
    let k = endpoint.k;
    if k == 0 || pics.len() < k {
        return None;
    }
    let mut sorted = pics.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Some(match endpoint.kind {
        EndpointKind::AverageTopK => sorted[..k].iter().sum::<f64>() / k as f64,
        EndpointKind::MinTopK => sorted[k - 1],
    })
}

pub fn endpoint_reached(pics: &[f64], endpoint: &EndpointSpec) -> bool {
    endpoint_value(pics, endpoint).is_some_and(|v| v >= endpoint.target)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointOutcome {
    pub ligands_to_target: usize,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutcome {
    /// One entry per requested endpoint, in request order.
    pub endpoints: Vec<EndpointOutcome>,
    pub cycles: Vec<CycleRecord>,
}

/// Tracks several endpoints over one trajectory.
struct EndpointTracker<'a> {
    endpoints: &'a [EndpointSpec],
    reached: Vec<Option<usize>>,
    cap: usize,
}

impl<'a> EndpointTracker<'a> {
    fn new(endpoints: &'a [EndpointSpec], cap: usize) -> Self {
        EndpointTracker {
            endpoints,
            reached: vec![None; endpoints.len()],
            cap,
        }
    }

    fn update(&mut self, pics: &[f64], tested: usize) {
        for (r, e) in self.reached.iter_mut().zip(self.endpoints) {
            if r.is_none() && endpoint_reached(pics, e) {
                *r = Some(tested);
            }
        }
    }

    fn done(&self) -> bool {
        self.reached.iter().all(Option::is_some)
    }

    fn finish(&self) -> Vec<EndpointOutcome> {
        self.reached
            .iter()
            .map(|r| {
                let ltt = r.unwrap_or(self.cap).min(self.cap);
                EndpointOutcome {
                    ligands_to_target: ltt,
                    failed: ltt == self.cap,
                }
            })
            .collect()
    }
}

/// Runs one campaign until every endpoint is reached or `cap` tests are spent.
///
/// Policies never see the endpoints, so one trajectory serves all of them.
pub fn run_campaign(
    dataset: &Dataset,
    policy: PolicyKind,
    config: &PolicyConfig,
    endpoints: &[EndpointSpec],
    cap: usize,
    seed: u64,
) -> Result<CampaignOutcome, SimulationError> {
    if endpoints.is_empty() {
        return Err(SimulationError::NoEndpoints);
    }
    let mut state = CampaignState::new(dataset.pool().clone());
    let mut tracker = EndpointTracker::new(endpoints, cap);
    let mut tested = 0;
    let mut cycle = 0;
    while !tracker.done() && tested < cap && !state.rest().is_empty() {
        let take = config.batch_size.min(cap - tested);
        let mut rng = cycle_rng(seed, cycle);
        let proposal = policy
            .propose(&state.view(), config, take, &mut rng)
            .map_err(|source| SimulationError::Policy {
                cycle,
                source,
                cycles: state.cycles().to_vec(),
            })?;
        state.credit(&proposal.credited);
        let results: Vec<(usize, f64)> = proposal.batch.iter().map(|&i| (i, dataset.pic(i))).collect();
        state.complete_cycle(&results);
        tested += results.len();
        tracker.update(&state.seen_pics(), tested);
        cycle += 1;
    }
    Ok(CampaignOutcome {
        endpoints: tracker.finish(),
        cycles: state.cycles,
    })
}

/// Recomputes endpoint outcomes from a cycle log, reading PICs from the dataset.
pub fn replay(
    dataset: &Dataset,
    endpoints: &[EndpointSpec],
    cap: usize,
    cycles: &[CycleRecord],
) -> Result<Vec<EndpointOutcome>, SimulationError> {
    let pool = dataset.pool();
    let mut tracker = EndpointTracker::new(endpoints, cap);
    let mut tested = vec![false; pool.len()];
    let mut pics = Vec::new();
    for rec in cycles {
        for id in &rec.batch {
            let i = pool
                .index_of(id)
                .ok_or_else(|| SimulationError::UnknownLigand(id.clone()))?;
            if std::mem::replace(&mut tested[i], true) {
                return Err(SimulationError::DuplicateTest(id.clone()));
            }
            pics.push(dataset.pic(i));
        }
        tracker.update(&pics, pics.len());
    }
    Ok(tracker.finish())
}

/// Replicates of one (protein, policy, endpoint) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub protein_id: String,
    pub policy: PolicyKind,
    pub endpoint: EndpointSpec,
    pub batch_size: usize,
    pub cap: usize,
    pub seeds: Vec<u64>,
    pub ligands_to_target: Vec<usize>,
    pub failed: Vec<bool>,
}

impl RunResult {
    /// Mean ligands-to-target, failures counted at the cap.
    pub fn mlt(&self) -> f64 {
        if self.ligands_to_target.is_empty() {
            return f64::NAN;
        }
        self.ligands_to_target.iter().sum::<usize>() as f64 / self.ligands_to_target.len() as f64
    }

    pub fn failures(&self) -> usize {
        self.failed.iter().filter(|f| **f).count()
    }
}

/// Runs `reps` campaigns with seeds `base_seed..base_seed + reps` and returns
/// one [`RunResult`] per endpoint. Replicates run in parallel; results are
/// collected in seed order.
pub fn run_replicates(
    dataset: &Dataset,
    policy: PolicyKind,
    config: &PolicyConfig,
    endpoints: &[EndpointSpec],
    cap: usize,
    reps: usize,
    base_seed: u64,
) -> Result<Vec<RunResult>, SimulationError> {
    let seeds: Vec<u64> = (0..reps as u64).map(|r| base_seed.wrapping_add(r)).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&s| run_campaign(dataset, policy, config, endpoints, cap, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(collect_results(dataset.protein_id(), policy, config.batch_size, cap, endpoints, &seeds, &outcomes))
}

/// Transposes per-seed outcomes into per-endpoint results.
pub fn collect_results(
    protein_id: &str,
    policy: PolicyKind,
    batch_size: usize,
    cap: usize,
    endpoints: &[EndpointSpec],
    seeds: &[u64],
    outcomes: &[CampaignOutcome],
) -> Vec<RunResult> {
    endpoints
        .iter()
        .enumerate()
        .map(|(e, spec)| RunResult {
            protein_id: protein_id.to_string(),
            policy,
            endpoint: *spec,
            batch_size,
            cap,
            seeds: seeds.to_vec(),
            ligands_to_target: outcomes.iter().map(|o| o.endpoints[e].ligands_to_target).collect(),
            failed: outcomes.iter().map(|o| o.endpoints[e].failed).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_examples() {
        let mut pics = vec![8.01; 10];
        pics.extend([5.0, 6.0]);
        assert!(endpoint_reached(&pics, &EndpointSpec::average_top10(8.0)));
        assert!(!endpoint_reached(&[9.0; 7], &EndpointSpec::average_top10(8.0)));
        assert!(!endpoint_reached(&[9.0, 8.6, 8.4], &EndpointSpec::min_top3(8.5)));
        assert!(endpoint_reached(&[9.0, 8.6, 8.5], &EndpointSpec::min_top3(8.5)));
    }

    #[test]
    fn cycle_streams_differ() {
        use rand::Rng;
        let a: u64 = cycle_rng(3, 0).random();
        let b: u64 = cycle_rng(3, 1).random();
        let c: u64 = cycle_rng(3, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
