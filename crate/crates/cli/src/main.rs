//! `isoflow classify|simulate|spectrum|sweep --config <path> --out <dir> [--threads N]`
//!
//! Exit codes: 0 success, 2 invalid config or usage, 3 precondition violation, 4 numeric failure.

mod commands;
mod config;
mod error;
mod expr;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult};

/// Environment variable that takes precedence over `--threads`.
const THREADS_ENV: &str = "ISOFLOW_THREADS";

#[derive(Parser)]
#[command(name = "isoflow", version, about = "Synchronization analysis for isotropic stochastic flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the model and write report.json.
    Classify(RunArgs),
    /// Estimate P(r_t <= eta) and write distance_law.csv and summary.json.
    Simulate(RunArgs),
    /// Write the Lyapunov spectrum to spectrum.json.
    Spectrum(RunArgs),
    /// Classify over a one-parameter grid and write sweep.csv.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; ISOFLOW_THREADS overrides this.
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("{THREADS_ENV}='{v}' is not a thread count")))?,
        ),
        Err(_) => flag,
    };
    match n {
        Some(0) => Err(CliError::config("thread count must be at least 1")),
        n => Ok(n),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (name, args) = match &cli.command {
        Command::Classify(a) => ("classify", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Spectrum(a) => ("spectrum", a),
        Command::Sweep(a) => ("sweep", a),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(args.threads)? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker threads: {e}")))?;
    let cfg = RunConfig::load(&args.config)?;
    cfg.check_command(name)?;
    pool.install(|| match &cli.command {
        Command::Classify(a) => commands::classify(&cfg, &a.out).map(|p| println!("wrote {}", p.display())),
        Command::Simulate(a) => commands::simulate(&cfg, &a.out)
            .map(|(c, j)| println!("wrote {} and {}", c.display(), j.display())),
        Command::Spectrum(a) => commands::spectrum(&cfg, &a.out).map(|p| println!("wrote {}", p.display())),
        Command::Sweep(a) => commands::sweep(&cfg, &a.out).map(|p| println!("wrote {}", p.display())),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // A panic is a numeric failure as far as callers are concerned; keep exit codes in {0, 2, 3, 4}.
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
        Err(_) => ExitCode::from(error::ExitKind::Numeric as u8),
    }
}
