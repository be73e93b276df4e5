//! `paneitz`: batch driver for coefficient tables, ground states, multistart
//! searches and ε sweeps.
//!
//! ```text
//! paneitz <constants|groundstate|solve|sweep> --config run.toml --out results/ [--deterministic]
//! ```
//!
//! Exit status 0 when every invariant held, 1 when the config is invalid
//! (nothing is computed), 2 when an invariant failed. `PANEITZ_THREADS` caps
//! the worker pool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Mode};
use run::{execute, Failure, Invocation};

pub const THREADS_VAR: &str = "PANEITZ_THREADS";

#[derive(Parser)]
#[command(name = "paneitz", version, about = "Spike solutions of fourth-order equations on flat tori")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run multistart seeds one after another.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Coefficient table of product manifolds.
    Constants(Common),
    /// Ground state of the limit problem.
    Groundstate(Common),
    /// Multistart search at a single ε.
    Solve(Common),
    /// Multistart at each ε of a decreasing list.
    Sweep(Common),
}

fn threads() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError { field: THREADS_VAR.into(), message: format!("`{v}` is not a positive integer") }),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.verb {
        Verb::Constants(a) => (Mode::Constants, a),
        Verb::Groundstate(a) => (Mode::GroundState, a),
        Verb::Solve(a) => (Mode::Multiplicity, a),
        Verb::Sweep(a) => (Mode::Sweep, a),
    };
    match run_cli(mode, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("paneitz {}: {f}", mode.verb());
            ExitCode::from(f.exit_code())
        }
    }
}

fn run_cli(mode: Mode, args: &Common) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        Failure::Config(ConfigError { field: "--config".into(), message: format!("{}: {e}", args.config.display()) })
    })?;
    let threads = threads()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(anyhow::anyhow!("thread pool: {e}")))?;
    }
    let inv = Invocation { mode, config_text: &text, out: args.out.as_deref(), deterministic: args.deterministic };
    let report = execute(&inv, threads)?;
    println!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    println!("manifest: {}", report.dir.join(manifest::MANIFEST_NAME).display());
    Ok(())
}
