//! `ionladder`: config-driven front end for the crystal -> couplings ->
//! dynamics / exact-diagonalization pipeline.

mod commands;
mod config;
mod figures;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

macro_rules! compute_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Compute(e.to_string())
            }
        })*
    };
}

compute_errors!(
    ionladder::crystal::CrystalError,
    ionladder::phonons::PhononError,
    ionladder::lightforce::CouplingError,
    ionladder::spinphonon::DynamicsError,
    ionladder::ed::EdError
);

#[derive(Debug, Parser)]
#[command(name = "ionladder", version, about = "Trapped-ion zig-zag ladders as frustrated Ising simulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: Output,
    /// Override a config value, e.g. `--set trap.alpha_y=30`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct Output {
    /// Output directory (default: config `out`, then $IONLADDER_OUT, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the minimizer and Lanczos start vectors.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium positions.
    Crystal(Common),
    /// Normal-mode frequencies and eigenvectors.
    Modes(Common),
    /// Exact and dipolar spin-spin couplings.
    Couplings(Common),
    /// Validity margins of the laser configuration.
    Validate(Common),
    /// Spin-phonon dynamics compared with the effective Ising model.
    Dynamics(Common),
    /// Exact diagonalization of one spin model.
    Ed(Common),
    /// Phase-diagram sweep (resumable).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Regenerate a figure's data from bundled parameters.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(figures::FIGURES))]
        figure: String,
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Re-run the command recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.out.clone())
        .or_else(|| std::env::var_os("IONLADDER_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_configured(command: &str, mut config: RunConfig, output: Output, workers: usize) -> Result<(), CliError> {
    if let Some(seed) = output.seed {
        config.seed = seed;
    }
    let dir = out_dir(output.out, &config);
    config.validate_for(command)?;
    execute(command, &config, &dir, workers)
}

/// Runs `command` and records a manifest next to its outputs.
fn execute(command: &str, config: &RunConfig, dir: &Path, workers: usize) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let start = std::time::Instant::now();
    let outputs = commands::dispatch(command, config, dir, workers)?;
    manifest::write(dir, command, config, start.elapsed(), &outputs)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let simple = |name: &str, c: Common, workers: usize| {
        let config = RunConfig::load(&c.config, &c.overrides)?;
        run_configured(name, config, c.output, workers)
    };
    match cli.command {
        Command::Crystal(c) => simple("crystal", c, 0),
        Command::Modes(c) => simple("modes", c, 0),
        Command::Couplings(c) => simple("couplings", c, 0),
        Command::Validate(c) => simple("validate", c, 0),
        Command::Dynamics(c) => simple("dynamics", c, 0),
        Command::Ed(c) => simple("ed", c, 0),
        Command::Sweep { common, workers } => simple("sweep", common, workers),
        Command::Reproduce { figure, output, workers } => {
            let (command, config) = figures::bundled(&figure)?;
            let Output { out, seed } = output;
            let dir = out.unwrap_or_else(|| out_dir(None, &config)).join(&figure);
            run_configured(command, config, Output { out: Some(dir), seed }, workers)
        }
        Command::Rerun { manifest, out, workers } => {
            let (command, config) = manifest::read(&manifest)?;
            let dir = out.unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());
            config.validate_for(&command)?;
            execute(&command, &config, &dir, workers)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
