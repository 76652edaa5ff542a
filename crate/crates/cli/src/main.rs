//! `covplan`: simulate, calibrate, evaluate and plan RSU coverage.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "covplan", version, about = "Dominant-path coverage planning for ITS-G5 roadside units")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Project configuration (TOML).
    #[arg(long, global = true, default_value = "covplan.toml")]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, default uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid cell size in meters; overrides `cell_size_m`.
    #[arg(long, global = true)]
    pub cell_size: Option<f64>,
    /// Seed for the synthetic-data helpers.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Coverage grids and trajectory exports for every transmitter.
    Simulate,
    /// Derive CW and module offsets (and optionally exponents) from logs.
    Calibrate {
        /// Transmitter that was active during the CW drive; defaults to the first.
        #[arg(long)]
        tx: Option<String>,
    },
    /// Compare the calibrated simulation with a SERVICE log.
    Evaluate {
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        tx: Option<String>,
    },
    /// Rank candidate transmitter positions by covered area.
    Plan {
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Write a measurement log sampled from the simulation.
    SynthLog(SynthLogArgs),
    /// Write a module sweep log with a constant gap.
    SynthSweep(SynthSweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogKind {
    Cw,
    Service,
}

#[derive(Debug, Args)]
pub struct SynthLogArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub tx: Option<String>,
    /// Trajectory to sample; defaults to the first one configured.
    #[arg(long)]
    pub trajectory: Option<String>,
    #[arg(long, value_enum, default_value_t = LogKind::Cw)]
    pub kind: LogKind,
    /// Extra path loss added to the simulated value.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pl_offset_db: f64,
    /// Standard deviation of Gaussian noise on each level.
    #[arg(long, default_value_t = 0.0)]
    pub noise_db: f64,
    /// Simulate with this calibration record applied.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthSweepArgs {
    #[arg(long)]
    pub output: PathBuf,
    /// `P_spec - P_module` for every row.
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    pub gap_db: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_db: f64,
    #[arg(long, default_value_t = 35)]
    pub min_attenuation_db: u32,
    #[arg(long, default_value_t = 105)]
    pub max_attenuation_db: u32,
    /// Generator level before the attenuator.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub source_dbm: f64,
}

fn run(cli: Cli) -> CliResult<()> {
    let mode = commands::configure_threads(cli.global.threads)?;
    commands::dispatch(&cli, mode)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(u8::try_from(e.exit_code).unwrap_or(1))
}
