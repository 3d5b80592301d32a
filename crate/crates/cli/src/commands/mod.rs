pub mod benchmark;
pub mod gen_data;
pub mod serve;
pub mod simulate;
pub mod throughput;

use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;

use spade_core::{run_replicates, Dataset, EndpointSpec, PolicyConfig, PolicyKind, RunResult};

/// Replicates of every (protein, policy) pair with shared seeds.
///
/// Pairs run in parallel; results come back in protein-major, policy-minor
/// order so the output never depends on scheduling.
pub fn run_suite(
    datasets: &[Dataset],
    policies: &[PolicyKind],
    config: &PolicyConfig,
    endpoints: &[EndpointSpec],
    cap: usize,
    reps: usize,
    seed: u64,
) -> anyhow::Result<Vec<RunResult>> {
    let jobs: Vec<(&Dataset, PolicyKind)> =
        datasets.iter().flat_map(|d| policies.iter().map(move |p| (d, *p))).collect();
    let per_job = jobs
        .par_iter()
        .map(|(ds, policy)| {
            let start = Instant::now();
            let results = run_replicates(ds, *policy, config, endpoints, cap, reps, seed)
                .with_context(|| format!("{} with {policy}", ds.protein_id()))?;
            tracing::info!(
                protein = ds.protein_id(),
                policy = %policy,
                reps,
                mlt = results[0].mlt(),
                seconds = start.elapsed().as_secs_f64(),
                "replicates done"
            );
            Ok(results)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(per_job.into_iter().flatten().collect())
}
