//! Operator entry points: simulate, benchmark, gen-data, serve and
//! bench-throughput. The binary in `main.rs` only parses and dispatches.

pub mod args;
pub mod commands;
pub mod datasets;
pub mod output;

pub use args::{Cli, Command};

/// Runs a parsed command line.
pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Benchmark(a) => commands::benchmark::run(&a),
        Command::GenData(a) => commands::gen_data::run(&a),
        Command::Serve(a) => commands::serve::run(&a),
        Command::BenchThroughput(a) => commands::throughput::run(&a),
    }
}
