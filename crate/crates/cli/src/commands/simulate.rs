use anyhow::{bail, Context};
use serde_json::json;

use spade_core::analytics::emit_report;

use crate::args::SimulateArgs;
use crate::commands::run_suite;
use crate::datasets;
use crate::output::{init_logging, with_workers, RunDir};

pub fn run(a: &SimulateArgs) -> anyhow::Result<()> {
    let config = a.policy_args.config();
    config.validate().context("invalid policy settings")?;
    let endpoint = a.endpoint.spec(a.target);
    endpoint.validate()?;
    if a.run.reps == 0 {
        bail!("--reps must be at least 1");
    }

    let mut data = datasets::load(&a.data)?;
    if let Some(p) = &a.protein {
        data.retain(|d| d.protein_id() == p);
        if data.is_empty() {
            bail!("protein {p} is not in {}", a.data.display());
        }
    }

    let run_id = a.run.run_id.clone().unwrap_or_else(|| {
        format!("simulate-{}-{}-t{}-s{}", a.policy, endpoint.label(), a.target, a.run.seed)
    });
    let dir = RunDir::create(&a.run.out, &run_id)?;
    init_logging(Some(&dir.log_file("simulate.log")));
    tracing::info!(run = %run_id, proteins = data.len(), policy = %a.policy, "simulate");

    let results = with_workers(a.run.workers, || {
        run_suite(&data, &[a.policy], &config, &[endpoint], a.run.cap, a.run.reps, a.run.seed)
    })??;
    let report = emit_report(&results, a.run.level)?;
    dir.write_report(&report, &results, false)?;
    dir.write(
        "config.json",
        serde_json::to_vec_pretty(&json!({
            "command": "simulate",
            "data": a.data,
            "policy": a.policy,
            "endpoint": endpoint,
            "config": config,
            "cap": a.run.cap,
            "reps": a.run.reps,
            "seed": a.run.seed,
        }))?,
    )?;
    print!("{}", report.summary);
    println!("wrote {}", dir.path().display());
    Ok(())
}
