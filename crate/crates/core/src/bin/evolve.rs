//! `evolve benchmark|two-peaks|cartpole [--config FILE] [--set key=value]... [--repeats N]
//! [--seed S] [--workers W] [--out DIR]`
//!
//! Exit status: 0 when every run succeeds, 2 when some runs failed, 64 on configuration errors,
//! 1 on I/O failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diffevo::config::{parse_assignment, parse_assignments, Experiment, ExperimentConfig};
use diffevo::harness::{resolve_out_dir, run_experiment};
use diffevo::Error;

const EXIT_RUNS_FAILED: u8 = 2;
const EXIT_CONFIG: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "evolve", version, about = "Diffusion Evolution experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Five 2-D benchmark landscapes, reporting elite entropy and fitness.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Restrict to one benchmark (or a comma-separated list).
        #[arg(long)]
        benchmark: Option<String>,
    },
    /// Two-peak Gaussian mixture with full per-generation traces.
    TwoPeaks {
        #[command(flatten)]
        common: Common,
    },
    /// Cart-pole neuroevolution.
    Cartpole {
        #[command(flatten)]
        common: Common,
        /// small-latent, deep-latent or small-ambient.
        #[arg(long)]
        preset: Option<String>,
    },
}

#[derive(clap::Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; may be repeated. Applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed from which per-run seeds are derived.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; falls back to `output_dir`, then `$DIFFEVO_OUT`, then `./runs`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn assignments(common: &Common, extra: &[(&str, Option<String>)]) -> Result<Vec<(String, String)>, Error> {
    let mut out = match &common.config {
        Some(path) => parse_assignments(&std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?)?,
        None => Vec::new(),
    };
    for s in &common.set {
        out.push(parse_assignment(s)?);
    }
    let flags = [
        ("repeats", common.repeats.map(|v| v.to_string())),
        ("master_seed", common.seed.map(|v| v.to_string())),
        ("workers", common.workers.map(|v| v.to_string())),
    ];
    for (k, v) in flags.into_iter().chain(extra.iter().map(|(k, v)| (*k, v.clone()))) {
        if let Some(v) = v {
            out.push((k.to_string(), v));
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, common, extra) = match &cli.command {
        Command::Benchmark { common, benchmark } => {
            (Experiment::Benchmark, common, vec![("landscape.name", benchmark.clone())])
        }
        Command::TwoPeaks { common } => (Experiment::TwoPeaks, common, vec![]),
        Command::Cartpole { common, preset } => (Experiment::Cartpole, common, vec![("cartpole.preset", preset.clone())]),
    };
    let config = match assignments(common, &extra).and_then(|a| ExperimentConfig::resolve(Some(experiment), &a)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("evolve: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out_dir = resolve_out_dir(common.out.clone(), &config);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("evolve: cannot create {}: {e}", out_dir.display());
        return ExitCode::FAILURE;
    }
    match run_experiment(&config, &out_dir) {
        Ok(manifest) => {
            print!("{}", manifest.table());
            println!("artifacts in {}", out_dir.display());
            if manifest.failures() > 0 {
                ExitCode::from(EXIT_RUNS_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("evolve: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("evolve: {e}");
            ExitCode::FAILURE
        }
    }
}
