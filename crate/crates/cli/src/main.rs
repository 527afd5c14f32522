//! `sewkit`: runs one experiment from a JSON config and writes
//! `resolved-config.json`, `results.csv`, `summary.json` and SVG plots.

mod config;
mod experiments;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use config::Experiment;

#[derive(Debug, Parser)]
#[command(name = "sewkit", version, about = "Reproducible stochastic sewing experiments")]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides SEWKIT_OUT and the config.
    #[arg(long, env = "SEWKIT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let raw = config::RawConfig::load(&cli.config, cli.experiment)?;
    let seed = cli.seed.or(raw.seed).unwrap_or(config::DEFAULT_SEED);
    let out = cli.out.or_else(|| raw.out.clone()).unwrap_or_else(|| PathBuf::from(config::DEFAULT_OUT));
    if cli.workers == Some(0) {
        anyhow::bail!("--workers must be at least 1");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(k) = cli.workers {
        pool = pool.num_threads(k);
    }
    let pool = pool.build().context("building the worker pool")?;
    let run = config::Run { experiment: cli.experiment, seed, out, workers: pool.current_num_threads() };
    let start = Instant::now();
    let report = pool.install(|| experiments::execute(&run, raw.params))?;
    eprintln!("{} finished in {:.1}s, artifacts in {}", run.experiment.name(), start.elapsed().as_secs_f64(), run.out.display());
    for v in &report.verdicts {
        println!("{} {}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.criterion, report::fmt_num(v.value), v.target);
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
