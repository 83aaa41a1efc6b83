//! Batch front end: reads a TOML run configuration, executes one task,
//! and writes machine-readable artifacts (summary.json, CSVs, plot data).
//! Exit status: 0 pass, 2 assertion failure, 1 configuration/runtime error.

mod config;
mod report;
mod tasks;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "itespec", about = "Interior transmission eigenvalue toolkit")]
struct Cli {
    /// Path to the TOML run configuration.
    config: PathBuf,
    /// Worker threads for grid scans (default: machine cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Re-run the per-task acceptance assertions (costlier cross-checks).
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: failed to build thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let run: config::RunConfig = match toml::from_str(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: config parse failed: {e}");
            return ExitCode::from(1);
        }
    };
    match tasks::dispatch(&run, cli.verify) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("assertion failure: see summary.json");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
