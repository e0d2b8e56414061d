use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use sdm_core::io::{self, atomic_write, standardize};
use sdm_core::metrics::{rmse, CellSummary, ForecastRecord, ReportMetadata};
use sdm_core::{
    make_pair, run_benchmark, run_pair, BenchmarkSpec, SdmError, SimConfig, StepRecord,
};

use crate::config::RunConfig;
use crate::error::CliError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| SdmError::Io(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| SdmError::Io(format!("{}: {e}", dir.display())))?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    created_unix: u64,
    config: &'a RunConfig,
}

pub fn simulate(config: &RunConfig) -> Result<(), CliError> {
    let out = config.output()?;
    let pair = make_pair(SimConfig {
        family: config.family,
        length: config.length,
        sigma_u: config.sigma_u,
        ar_coefficient: config.ar_coefficient,
        seed: config.seed(),
    })?;
    let csv = io::pair_csv(&pair, Some(&config.to_json()))?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    atomic_write(out, &csv)?;
    write_json(
        &out.with_extension("config.json"),
        &Sidecar {
            created_unix: now_unix(),
            config,
        },
    )
}

#[derive(Debug, Serialize)]
struct FitSummary<'a> {
    created_unix: u64,
    config: &'a RunConfig,
    steps: usize,
    scored_steps: usize,
    undefined_forecasts: usize,
    rmse: f64,
    persistence_rmse: f64,
    final_lag: usize,
    final_column: usize,
    final_theta: f64,
    final_lambda: f64,
}

/// RMSE of the filter and of `y_hat = y_{t-1}` over the steps where the
/// filter produced a forecast.
fn score(records: &[StepRecord], y: &[f64]) -> Result<(usize, f64, f64), SdmError> {
    let mut model = Vec::new();
    let mut naive = Vec::new();
    for r in records {
        if let Some(y_hat) = r.y_hat {
            model.push(ForecastRecord {
                t: r.t,
                y_hat,
                y: r.y,
            });
            naive.push(ForecastRecord {
                t: r.t,
                y_hat: y[r.t - 2],
                y: r.y,
            });
        }
    }
    if model.is_empty() {
        return Err(SdmError::DegenerateSeries(
            "no step produced a defined forecast".into(),
        ));
    }
    Ok((model.len(), rmse(&model)?, rmse(&naive)?))
}

pub fn fit(config: &RunConfig) -> Result<(), CliError> {
    let input = config.input()?;
    let out = config.output()?;
    let filter = config.filter();
    filter.validate()?;
    let (x, y) = io::load_pair(
        input,
        &config.x_column,
        &config.y_column,
        config.n_states + 2,
    )?;
    let x = standardize(&x, config.standardize, config.min_history)?;
    let y = standardize(&y, config.standardize, config.min_history)?;

    let records = run_pair(&x, &y, config.variant, &filter)?;
    let (scored, model_rmse, naive_rmse) = score(&records, &y)?;
    let last = records.last().expect("run_pair yields at least one step");
    let (final_lag, final_column) = last.argmax(config.n_states);

    let meta = config.to_json();
    ensure_dir(out)?;
    atomic_write(
        &out.join("heatmap.csv"),
        &io::heatmap_csv(&records, config.n_states, Some(&meta))?,
    )?;
    atomic_write(
        &out.join("forecasts.csv"),
        &io::forecast_csv(&records, Some(&meta))?,
    )?;
    write_json(
        &out.join("summary.json"),
        &FitSummary {
            created_unix: now_unix(),
            config,
            steps: records.len(),
            scored_steps: scored,
            undefined_forecasts: records.len() - scored,
            rmse: model_rmse,
            persistence_rmse: naive_rmse,
            final_lag,
            final_column: final_column + 1,
            final_theta: last.theta,
            final_lambda: last.lambda,
        },
    )
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema_version: u32,
    created_unix: u64,
    config: &'a RunConfig,
    metadata: &'a ReportMetadata,
    cells: &'a [CellSummary],
}

pub fn benchmark(config: &RunConfig) -> Result<(), CliError> {
    let out = config.output()?;
    let spec = BenchmarkSpec {
        families: config.families.clone(),
        sigma_grid: config.sigma_grid.clone(),
        trials: config.trials,
        seed_base: config.seed(),
        length: config.length,
        ar_coefficient: config.ar_coefficient,
        filter: config.filter(),
    };
    if spec.families.is_empty() || spec.sigma_grid.is_empty() {
        return Err(CliError::Usage(
            "families and sigma_grid must be non-empty".into(),
        ));
    }
    let report = match config.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| SdmError::Io(e.to_string()))?
            .install(|| run_benchmark(&spec))?,
        None => run_benchmark(&spec)?,
    };

    ensure_dir(out)?;
    atomic_write(
        &out.join("trials.csv"),
        &io::trials_csv(&report.raw, Some(&config.to_json()))?,
    )?;
    write_json(
        &out.join("report.json"),
        &ReportDocument {
            schema_version: REPORT_SCHEMA_VERSION,
            created_unix: now_unix(),
            config,
            metadata: &report.metadata,
            cells: &report.cells,
        },
    )
}
