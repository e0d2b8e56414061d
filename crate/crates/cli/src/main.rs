//! `sdm`: simulate lead/lag pairs, fit the lag filter to a CSV pair, or run
//! the Monte-Carlo benchmark.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdm_core::io::Standardize;
use sdm_core::{Family, SweepMode, Variant};

use config::{load_config_file, Mode, RunConfig, SEED_ENV};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "sdm",
    version,
    about = "Signal diffusion mapping: track a drifting lag and forecast the lagging series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic pair CSV (t, x, y, tau) plus a config sidecar.
    Simulate(RunArgs),
    /// Run the filter over a CSV pair; write heatmap, forecasts and a summary.
    Fit(RunArgs),
    /// Monte-Carlo benchmark over families and noise levels.
    Benchmark(RunArgs),
}

/// Every flag overrides the matching key of `--config`.
#[derive(Args)]
struct RunArgs {
    /// TOML key = value file, or any artifact with an embedded config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    n_states: Option<usize>,
    #[arg(long)]
    floor: Option<f64>,
    /// pseudocode | fresh-buffer
    #[arg(long)]
    sweep: Option<SweepMode>,
    /// none | global-z | expanding-z
    #[arg(long)]
    standardize: Option<Standardize>,
    #[arg(long)]
    min_history: Option<usize>,
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// File for simulate, directory for fit and benchmark.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    x_column: Option<String>,
    #[arg(long)]
    y_column: Option<String>,
    /// Falls back to $SDM_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    sigma_u: Option<f64>,
    #[arg(long)]
    ar_coefficient: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<Family>>,
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// Benchmark worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

impl RunArgs {
    fn resolve(self, mode: Mode) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load_config_file(path)?,
            None => RunConfig::default(),
        };
        match cfg.mode {
            Some(m) if m != mode => {
                return Err(CliError::Usage(format!(
                    "config is for `{m}`, not `{mode}`"
                )));
            }
            _ => cfg.mode = Some(mode),
        }
        let args = self;
        overlay!(
            cfg,
            args,
            variant,
            n_states,
            floor,
            sweep,
            standardize,
            min_history,
            x_column,
            y_column,
            family,
            length,
            sigma_u,
            ar_coefficient,
            families,
            sigma_grid,
            trials
        );
        if args.input.is_some() {
            cfg.input = args.input;
        }
        if args.output.is_some() {
            cfg.output = args.output;
        }
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        if args.jobs.is_some() {
            cfg.jobs = args.jobs;
        }
        cfg.resolve_seed(std::env::var(SEED_ENV).ok().as_deref())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::simulate(&args.resolve(Mode::Simulate)?),
        Command::Fit(args) => commands::fit(&args.resolve(Mode::Fit)?),
        Command::Benchmark(args) => commands::benchmark(&args.resolve(Mode::Benchmark)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdm: {} error: {e}", e.kind());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
