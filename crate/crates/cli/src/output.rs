//! Run directories: `{out}/{run_id}/` with report files and `logs/`.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::Context;
use tracing_subscriber::filter::LevelFilter;
use tracing_subscriber::layer::SubscriberExt;
use tracing_subscriber::util::SubscriberInitExt;
use tracing_subscriber::Layer;

use spade_core::analytics::Report;
use spade_core::RunResult;

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn create(out: &Path, run_id: &str) -> anyhow::Result<Self> {
        let path = out.join(run_id);
        fs::create_dir_all(path.join("logs")).with_context(|| format!("creating {}", path.display()))?;
        Ok(RunDir { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn log_file(&self, name: &str) -> PathBuf {
        self.path.join("logs").join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let p = self.path.join(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Report tables, the text summary and the raw per-seed results.
    pub fn write_report(&self, report: &Report, results: &[RunResult], tables: bool) -> anyhow::Result<()> {
        self.write("report.csv", &report.report_csv)?;
        self.write("h2h.csv", &report.h2h_csv)?;
        self.write("summary.txt", &report.summary)?;
        if tables {
            self.write("median.csv", &report.median_csv)?;
            self.write("wins.csv", &report.wins_csv)?;
            self.write("lift.csv", &report.lift_csv)?;
        }
        self.write("results.json", serde_json::to_vec_pretty(results)?)
    }
}

/// Logs to stderr and, when given, to a file. A second call in the same
/// process keeps the first subscriber.
pub fn init_logging(file: Option<&Path>) {
    let stderr = tracing_subscriber::fmt::layer()
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_filter(LevelFilter::INFO);
    let file_layer = file.and_then(|p| File::create(p).ok()).map(|f| {
        tracing_subscriber::fmt::layer()
            .with_writer(Mutex::new(f))
            .with_ansi(false)
            .with_filter(LevelFilter::DEBUG)
    });
    let _ = tracing_subscriber::registry().with(stderr).with(file_layer).try_init();
}

/// Runs `f` on a pool of `workers` threads (0 for one per core).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(f))
}
