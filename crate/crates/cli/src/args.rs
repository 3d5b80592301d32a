use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spade_core::{EndpointSpec, PolicyConfig, PolicyKind};

#[derive(Debug, Parser)]
#[command(name = "spade", version, about = "Sequential ligand selection: simulate, benchmark and run live campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated campaigns of one policy on one dataset.
    Simulate(SimulateArgs),
    /// Several policies on several proteins with shared seeds, plus comparison tables.
    Benchmark(BenchmarkArgs),
    /// Writes a synthetic dataset file.
    GenData(GenDataArgs),
    /// Runs the campaign service.
    Serve(ServeArgs),
    /// Times ensemble scoring of a large random pool.
    BenchThroughput(ThroughputArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointArg {
    /// Average PIC of the top 10 tested ligands.
    Avg10,
    /// Minimum PIC of the top 3 tested ligands.
    Min3,
}

impl EndpointArg {
    pub fn spec(self, target: f64) -> EndpointSpec {
        match self {
            EndpointArg::Avg10 => EndpointSpec::average_top10(target),
            EndpointArg::Min3 => EndpointSpec::min_top3(target),
        }
    }
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse::<PolicyKind>().map_err(|e| e.to_string())
}

fn parse_help_limit(s: &str) -> Result<Option<usize>, String> {
    match s {
        "none" | "inf" => Ok(None),
        _ => s
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("expected a count or `none`, got {s:?}")),
    }
}

/// Hyperparameter overrides on top of the defaults.
#[derive(Debug, Clone, Args)]
pub struct PolicyArgs {
    /// Ligands tested per cycle.
    #[arg(long, default_value_t = 10)]
    pub batch: usize,
    /// Robustness width; 0 disables the robust term.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Exponential weighting base; 1 weights every classifier equally.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Negative-set fraction.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Maximum number of anchor classifiers.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// PIC threshold for anchors.
    #[arg(long)]
    pub p_plus: Option<f64>,
    /// Suggestions credited to one anchor before it retires, or `none`.
    #[arg(long, value_parser = parse_help_limit)]
    pub help_limit: Option<Option<usize>>,
    /// GP observation noise variance.
    #[arg(long)]
    pub gp_noise: Option<f64>,
}

impl PolicyArgs {
    pub fn config(&self) -> PolicyConfig {
        let d = PolicyConfig::default();
        PolicyConfig {
            sigma: self.sigma.unwrap_or(d.sigma),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta.unwrap_or(d.beta),
            n_max: self.n_max.unwrap_or(d.n_max),
            p_plus: self.p_plus.unwrap_or(d.p_plus),
            batch_size: self.batch,
            help_limit: self.help_limit.unwrap_or(d.help_limit),
            solver: d.solver,
            gp_noise: self.gp_noise.unwrap_or(d.gp_noise),
        }
    }
}

/// Settings shared by the commands that write a run directory.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Replicates per protein; replicate r uses seed `seed + r`.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Test budget; campaigns that miss the endpoint score this value.
    #[arg(long, default_value_t = 400)]
    pub cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parent of the run directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run directory name; derived from the flags when omitted.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "SPADE_WORKERS", default_value_t = 0)]
    pub workers: usize,
    /// Significance level of the paired sign test.
    #[arg(long, default_value_t = spade_core::analytics::DEFAULT_LEVEL)]
    pub level: f64,
}

/// Synthetic proteins used when no data file is given.
#[derive(Debug, Clone, Args)]
pub struct SyntheticArgs {
    /// Number of synthetic proteins.
    #[arg(long, default_value_t = 20)]
    pub proteins: usize,
    #[arg(long, default_value_t = 5000)]
    pub ligands: usize,
    #[arg(long, default_value_t = 2048)]
    pub dim: usize,
    /// Probability that a fingerprint bit is set.
    #[arg(long, default_value_t = 0.02)]
    pub density: f64,
    /// Fraction of ligands with PIC at least 8.
    #[arg(long, default_value_t = 0.07)]
    pub frac_above_8: f64,
    /// Fraction of ligands with PIC at least 8.5.
    #[arg(long, default_value_t = 0.027)]
    pub frac_above_8_5: f64,
    /// Seed of the first protein; protein i uses `data_seed + i`.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Dataset file: CSV, or the binary format for any other extension.
    #[arg(long)]
    pub data: PathBuf,
    /// Only run this protein of a multi-protein file.
    #[arg(long)]
    pub protein: Option<String>,
    /// spade, random, gp-m, gp-ucb, gp-ei or gp-pi.
    #[arg(long, value_parser = parse_policy, default_value = "spade")]
    pub policy: PolicyKind,
    #[arg(long, value_enum, default_value_t = EndpointArg::Avg10)]
    pub endpoint: EndpointArg,
    #[arg(long, default_value_t = 8.0)]
    pub target: f64,
    #[command(flatten)]
    pub policy_args: PolicyArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Dataset file with one or more proteins; synthetic proteins otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    #[arg(long, value_parser = parse_policy, value_delimiter = ',', default_value = "spade,random")]
    pub policies: Vec<PolicyKind>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "avg10")]
    pub endpoints: Vec<EndpointArg>,
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub targets: Vec<f64>,
    #[command(flatten)]
    pub policy_args: PolicyArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenDataArgs {
    /// Output file; `.csv` writes CSV, anything else the binary format.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of campaign event logs.
    #[arg(long, default_value = "campaigns")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ThroughputArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub ligands: usize,
    #[arg(long, default_value_t = 20)]
    pub classifiers: usize,
    #[arg(long, default_value_t = 2048)]
    pub dim: usize,
    /// Bit density of the random ligands.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timed repetitions; the report lists each and the median.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
