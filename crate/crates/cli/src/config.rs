//! Run configuration: defaults, config-file loading and flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sdm_core::io::Standardize;
use sdm_core::metrics::{DEFAULT_LENGTH, DEFAULT_SIGMA_GRID, DEFAULT_TRIALS};
use sdm_core::simulation::DEFAULT_AR;
use sdm_core::{Family, FilterConfig, SweepMode, Variant};

use crate::error::CliError;

pub const SEED_ENV: &str = "SDM_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Fit,
    Benchmark,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Fit => "fit",
            Mode::Benchmark => "benchmark",
        })
    }
}

/// Everything that determines a run's outputs. Serialized into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub variant: Variant,
    pub n_states: usize,
    pub floor: f64,
    pub sweep: SweepMode,
    pub standardize: Standardize,
    /// Points before expanding-z statistics are trusted.
    pub min_history: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub x_column: String,
    pub y_column: String,
    pub seed: Option<u64>,
    pub family: Family,
    pub length: usize,
    pub sigma_u: f64,
    pub ar_coefficient: f64,
    pub families: Vec<Family>,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    /// Worker threads for benchmark trials. Does not affect results.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let filter = FilterConfig::default();
        Self {
            mode: None,
            variant: Variant::Uni,
            n_states: filter.n_states,
            floor: filter.floor,
            sweep: filter.sweep,
            standardize: Standardize::None,
            min_history: 10,
            input: None,
            output: None,
            x_column: "x".into(),
            y_column: "y".into(),
            seed: None,
            family: Family::F5,
            length: DEFAULT_LENGTH,
            sigma_u: 0.25,
            ar_coefficient: DEFAULT_AR,
            families: Family::ALL.to_vec(),
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            trials: DEFAULT_TRIALS,
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            n_states: self.n_states,
            floor: self.floor,
            sweep: self.sweep,
        }
    }

    /// Filter settings are checked for every mode so that any artifact's
    /// embedded config is valid input to `fit`.
    pub fn validate(&self) -> Result<(), CliError> {
        self.filter().validate()?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn output(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Usage("no output path given (--output)".into()))
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Usage("no input path given (--input)".into()))
    }

    /// Fills the seed from `SDM_SEED` when neither flags nor file set it.
    pub fn resolve_seed(&mut self, env: Option<&str>) -> Result<(), CliError> {
        if self.seed.is_none() {
            if let Some(raw) = env {
                let seed = raw.trim().parse().map_err(|_| {
                    CliError::Usage(format!("{SEED_ENV} is not an unsigned integer: `{raw}`"))
                })?;
                self.seed = Some(seed);
            }
        }
        self.seed.get_or_insert(0);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Reads a config file. TOML `key = value` files are the normal form; JSON
/// and the metadata line of any CSV artifact are accepted too, so a config
/// embedded in an output can be fed straight back in.
pub fn load_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|msg| CliError::Usage(format!("config {}: {msg}", path.display())))
}

fn parse_config(text: &str) -> Result<RunConfig, String> {
    let trimmed = text.trim_start();
    if let Some(rest) = trimmed.strip_prefix("# {") {
        let line = rest.lines().next().unwrap_or("");
        return parse_json(&format!("{{{line}"));
    }
    if trimmed.starts_with('{') {
        return parse_json(trimmed);
    }
    toml::from_str(text).map_err(|e| e.to_string())
}

fn parse_json(text: &str) -> Result<RunConfig, String> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}
