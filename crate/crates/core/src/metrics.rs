//! Forecast scoring and the Monte-Carlo benchmark harness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{FilterConfig, SweepMode};
use crate::error::{Result, SdmError};
use crate::pipeline::{run_pair, Variant};
use crate::simulation::{make_pair, Family, SimConfig, DEFAULT_AR, RNG_ALGORITHM};

/// Noise levels swept by default.
pub const DEFAULT_SIGMA_GRID: [f64; 6] = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0];

pub const DEFAULT_LENGTH: usize = 600;
pub const DEFAULT_TRIALS: usize = 50;
pub const FULL_TRIALS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub t: usize,
    pub y_hat: f64,
    pub y: f64,
}

/// Root mean squared forecast error.
pub fn rmse(records: &[ForecastRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(SdmError::InvalidArgument(
            "rmse of an empty forecast set".into(),
        ));
    }
    let sse: f64 = records.iter().map(|r| (r.y_hat - r.y).powi(2)).sum();
    Ok((sse / records.len() as f64).sqrt())
}

/// Excess of the achieved RMSE over the noise level.
pub fn fe_stat(rmse_value: f64, sigma_u: f64) -> f64 {
    rmse_value - sigma_u
}

/// Result of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub rmse: f64,
    pub fe: f64,
    pub records: Vec<ForecastRecord>,
    /// Posterior weights after each scored step, aligned with `records`.
    pub weights: Vec<Vec<f64>>,
    /// True lag at each scored step, aligned with `records`.
    pub taus: Vec<usize>,
}

impl TrialOutcome {
    /// Most probable lag (1-based) after each scored step.
    pub fn argmax_lags(&self) -> Vec<usize> {
        self.weights
            .iter()
            .map(|w| crate::belief::argmax(w) + 1)
            .collect()
    }
}

/// Simulates one pair, runs the uni-directional filter and scores every
/// forecast from `t = N_s + 1` onward.
pub fn run_trial(sim: &SimConfig, filter: &FilterConfig) -> Result<TrialOutcome> {
    let pair = make_pair(*sim)?;
    let steps = run_pair(&pair.x, &pair.y, Variant::Uni, filter)?;
    let mut records = Vec::with_capacity(steps.len());
    let mut weights = Vec::with_capacity(steps.len());
    let mut taus = Vec::with_capacity(steps.len());
    for s in steps {
        records.push(ForecastRecord {
            t: s.t,
            y_hat: s
                .y_hat
                .expect("uni-directional forecasts are always defined"),
            y: s.y,
        });
        taus.push(pair.lag_path.taus[s.t - 1]);
        weights.push(s.weights);
    }
    let rmse_value = rmse(&records)?;
    Ok(TrialOutcome {
        rmse: rmse_value,
        fe: fe_stat(rmse_value, sim.sigma_u),
        records,
        weights,
        taus,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub families: Vec<Family>,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub seed_base: u64,
    pub length: usize,
    pub ar_coefficient: f64,
    pub filter: FilterConfig,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            trials: DEFAULT_TRIALS,
            seed_base: 0,
            length: DEFAULT_LENGTH,
            ar_coefficient: DEFAULT_AR,
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMetadata {
    pub seed_base: u64,
    pub n_states: usize,
    pub length: usize,
    pub floor: f64,
    pub sweep: SweepMode,
    pub ar_coefficient: f64,
    pub trials: usize,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSummary {
    pub family: Family,
    pub sigma_u: f64,
    pub trials: usize,
    pub mean_rmse: f64,
    pub mean_fe: f64,
    /// Standard error of the mean FE (equal to that of the mean RMSE).
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub family: Family,
    pub sigma_u: f64,
    pub trial: usize,
    pub seed: u64,
    pub rmse: f64,
    pub fe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkReport {
    pub metadata: ReportMetadata,
    pub cells: Vec<CellSummary>,
    /// Per-trial values, exported separately as CSV.
    #[serde(skip)]
    pub raw: Vec<TrialResult>,
}

impl BenchmarkReport {
    pub fn cell(&self, family: Family, sigma_u: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.family == family && c.sigma_u == sigma_u)
    }
}

fn summarize(family: Family, sigma_u: f64, trials: &[TrialResult]) -> CellSummary {
    let n = trials.len() as f64;
    let mean_rmse = trials.iter().map(|t| t.rmse).sum::<f64>() / n;
    let mean_fe = trials.iter().map(|t| t.fe).sum::<f64>() / n;
    let std_error = if trials.len() > 1 {
        let var = trials.iter().map(|t| (t.fe - mean_fe).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    CellSummary {
        family,
        sigma_u,
        trials: trials.len(),
        mean_rmse,
        mean_fe,
        std_error,
    }
}

/// Runs every `(family, sigma_u)` cell for `trials` seeds
/// `seed_base + trial_index`. Trials run on the current rayon pool; the
/// result does not depend on scheduling.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    if spec.trials == 0 {
        return Err(SdmError::InvalidConfiguration(
            "trials must be at least 1".into(),
        ));
    }
    spec.filter.validate()?;
    let jobs: Vec<(Family, f64, usize)> = spec
        .families
        .iter()
        .flat_map(|&f| {
            spec.sigma_grid
                .iter()
                .flat_map(move |&s| (0..spec.trials).map(move |k| (f, s, k)))
        })
        .collect();

    let raw = jobs
        .par_iter()
        .map(|&(family, sigma_u, trial)| {
            let seed = spec.seed_base.wrapping_add(trial as u64);
            let sim = SimConfig {
                family,
                length: spec.length,
                sigma_u,
                ar_coefficient: spec.ar_coefficient,
                seed,
            };
            let outcome = run_trial(&sim, &spec.filter)?;
            Ok(TrialResult {
                family,
                sigma_u,
                trial,
                seed,
                rmse: outcome.rmse,
                fe: outcome.fe,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = raw
        .chunks(spec.trials)
        .map(|chunk| summarize(chunk[0].family, chunk[0].sigma_u, chunk))
        .collect();

    Ok(BenchmarkReport {
        metadata: ReportMetadata {
            seed_base: spec.seed_base,
            n_states: spec.filter.n_states,
            length: spec.length,
            floor: spec.filter.floor,
            sweep: spec.filter.sweep,
            ar_coefficient: spec.ar_coefficient,
            trials: spec.trials,
            rng: RNG_ALGORITHM.to_string(),
        },
        cells,
        raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal};

    fn rec(y_hat: f64, y: f64) -> ForecastRecord {
        ForecastRecord { t: 0, y_hat, y }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[rec(1.0, 1.0), rec(-2.0, -2.0)]).unwrap(), 0.0);
        let r = rmse(&[rec(3.0, 0.0), rec(0.0, 4.0)]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((r - 3.535_533_905_932_737_6).abs() < 1e-12);
        assert!(rmse(&[]).is_err());
    }

    #[test]
    fn rmse_of_gaussian_residuals() {
        let sigma = 0.7;
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let recs: Vec<_> = (0..100_000)
            .map(|_| rec(normal.sample(&mut rng), 0.0))
            .collect();
        let r = rmse(&recs).unwrap();
        assert!((r / sigma - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn fe_examples() {
        assert!((fe_stat(1.2, 1.0) - 0.2).abs() < 1e-15);
        assert_eq!(fe_stat(0.37, 0.37), 0.0);
        for (r, s) in [(0.3, 0.25), (2.1, 2.0), (0.05, 0.1)] {
            assert_eq!(fe_stat(r, s) + s, r);
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let sim = SimConfig::new(Family::F3, 300, 0.5, 9);
        let a = run_trial(&sim, &FilterConfig::default()).unwrap();
        let b = run_trial(&sim, &FilterConfig::default()).unwrap();
        assert_eq!((a.rmse, a.fe), (b.rmse, b.fe));
        assert_eq!(a.records.len(), 270);
        assert_eq!(a.records[0].t, 31);
    }

    #[test]
    fn single_trial_benchmark_matches_trial() {
        let spec = BenchmarkSpec {
            families: vec![Family::F2],
            sigma_grid: vec![0.5],
            trials: 1,
            seed_base: 77,
            ..BenchmarkSpec::default()
        };
        let report = run_benchmark(&spec).unwrap();
        let trial = run_trial(&SimConfig::new(Family::F2, 600, 0.5, 77), &spec.filter).unwrap();
        let cell = report.cell(Family::F2, 0.5).unwrap();
        assert_eq!(cell.trials, 1);
        assert_eq!(cell.mean_rmse, trial.rmse);
        assert_eq!(cell.mean_fe, trial.fe);
        assert_eq!(cell.std_error, 0.0);
    }

    #[test]
    fn benchmark_rejects_zero_trials() {
        let spec = BenchmarkSpec {
            trials: 0,
            ..BenchmarkSpec::default()
        };
        assert!(run_benchmark(&spec).is_err());
    }

    #[test]
    fn benchmark_cells_follow_grid_order() {
        let spec = BenchmarkSpec {
            families: vec![Family::F5, Family::F1],
            sigma_grid: vec![1.0, 0.25],
            trials: 3,
            length: 200,
            ..BenchmarkSpec::default()
        };
        let report = run_benchmark(&spec).unwrap();
        let keys: Vec<_> = report.cells.iter().map(|c| (c.family, c.sigma_u)).collect();
        assert_eq!(
            keys,
            vec![
                (Family::F5, 1.0),
                (Family::F5, 0.25),
                (Family::F1, 1.0),
                (Family::F1, 0.25)
            ]
        );
        assert_eq!(report.raw.len(), 12);
        for r in &report.raw {
            assert!((r.fe + r.sigma_u - r.rmse).abs() <= f64::EPSILON * r.rmse);
        }
    }
}
