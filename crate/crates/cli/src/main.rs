//! `vrrw`: run experiments described by a `key = value` config file.
//!
//! Exit status: 0 on success, 1 if a verification check fails, 2 for
//! configuration, usage or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrrw_core::config::{ExperimentConfig, ExperimentKind};
use vrrw_core::experiments::run_config;

#[derive(Parser)]
#[command(
    name = "vrrw",
    version,
    about = "Vertex-reinforced random walk experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recurrence or localization Monte Carlo.
    Simulate(Common),
    /// Martingale checks over fresh trajectories and stored records.
    Verify(Common),
    /// Scan of the minimization problem over a list of sizes.
    Lemma(Common),
    /// Recurrence and localization statistics across weight exponents.
    Phase(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; overrides `output`. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write one binary trajectory record per trajectory into this directory.
    #[arg(long, value_name = "DIR")]
    record: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Violations(usize),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (common, allowed): (Common, &[ExperimentKind]) = match cli.command {
        Command::Simulate(c) => (
            c,
            &[ExperimentKind::Recurrence, ExperimentKind::Localization],
        ),
        Command::Verify(c) => (c, &[ExperimentKind::Verify]),
        Command::Lemma(c) => (c, &[ExperimentKind::Lemma]),
        Command::Phase(c) => (c, &[ExperimentKind::Phase]),
    };
    let err = |e: vrrw_core::Error| Failure::Config(e.to_string());
    let mut cfg = ExperimentConfig::load(&common.config).map_err(err)?;
    if !allowed.contains(&cfg.kind) {
        let names: Vec<String> = allowed.iter().map(|k| k.to_string()).collect();
        return Err(Failure::Config(format!(
            "{}: kind = {} is not valid here (expected {})",
            common.config.display(),
            cfg.kind,
            names.join(" or ")
        )));
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = common.out {
        cfg.output = Some(o);
    }
    if let Some(dir) = &common.record {
        std::fs::create_dir_all(dir).map_err(|e| err(vrrw_core::Error::io(dir, e)))?;
    }
    let outcome = run_config(&cfg, common.record.as_deref()).map_err(err)?;
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &outcome.csv).map_err(|e| err(vrrw_core::Error::io(path, e)))?
        }
        None => print!("{}", outcome.csv),
    }
    eprintln!("{}", outcome.summary);
    if outcome.violations > 0 {
        return Err(Failure::Violations(outcome.violations));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violations(n)) => {
            eprintln!("error: {n} check violations");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
