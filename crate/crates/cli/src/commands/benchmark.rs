use anyhow::{bail, Context};
use serde_json::json;

use spade_core::analytics::emit_report;
use spade_core::EndpointSpec;

use crate::args::BenchmarkArgs;
use crate::commands::run_suite;
use crate::datasets;
use crate::output::{init_logging, with_workers, RunDir};

pub fn run(a: &BenchmarkArgs) -> anyhow::Result<()> {
    let config = a.policy_args.config();
    config.validate().context("invalid policy settings")?;
    if a.policies.is_empty() || a.endpoints.is_empty() || a.targets.is_empty() {
        bail!("need at least one policy, endpoint and target");
    }
    if a.run.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let endpoints: Vec<EndpointSpec> = a
        .endpoints
        .iter()
        .flat_map(|e| a.targets.iter().map(move |t| e.spec(*t)))
        .collect();
    for e in &endpoints {
        e.validate()?;
    }

    let run_id = a.run.run_id.clone().unwrap_or_else(|| format!("benchmark-s{}", a.run.seed));
    let dir = RunDir::create(&a.run.out, &run_id)?;
    init_logging(Some(&dir.log_file("benchmark.log")));

    let results = with_workers(a.run.workers, || -> anyhow::Result<_> {
        let data = match &a.data {
            Some(p) => datasets::load(p)?,
            None => datasets::synthetic_suite(&a.synthetic)?,
        };
        tracing::info!(
            run = %run_id,
            proteins = data.len(),
            policies = a.policies.len(),
            endpoints = endpoints.len(),
            "benchmark"
        );
        run_suite(&data, &a.policies, &config, &endpoints, a.run.cap, a.run.reps, a.run.seed)
    })??;

    let report = emit_report(&results, a.run.level)?;
    dir.write_report(&report, &results, true)?;
    let source = match &a.data {
        Some(p) => json!({ "file": p }),
        None => json!({
            "synthetic": {
                "proteins": a.synthetic.proteins,
                "ligands": a.synthetic.ligands,
                "dim": a.synthetic.dim,
                "density": a.synthetic.density,
                "frac_above_8": a.synthetic.frac_above_8,
                "frac_above_8_5": a.synthetic.frac_above_8_5,
                "data_seed": a.synthetic.data_seed,
            }
        }),
    };
    dir.write(
        "config.json",
        serde_json::to_vec_pretty(&json!({
            "command": "benchmark",
            "data": source,
            "policies": a.policies,
            "endpoints": endpoints,
            "config": config,
            "cap": a.run.cap,
            "reps": a.run.reps,
            "seed": a.run.seed,
            "level": a.run.level,
        }))?,
    )?;
    print!("{}", report.summary);
    println!("wrote {}", dir.path().display());
    Ok(())
}
