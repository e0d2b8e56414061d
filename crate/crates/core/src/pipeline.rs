//! Runs a filter variant over a full series pair, producing one record per
//! forecastable time step.
//!
//! At each `t > N_s` (1-based) the forecast for `y_t` is formed from the
//! beliefs after step `t - 1` and `x_{t-N_s..t-1}`; only then is `y_t` used
//! to build distances and advance the filter.

use serde::{Deserialize, Serialize};

use crate::belief::{step, BeliefGrid, BeliefVector, DistanceGrid, FilterConfig, FilterState};
use crate::error::{Result, SdmError};
use crate::measurement::{
    distances_bidirectional, distances_posneg, distances_uni, forecast_bidirectional,
    forecast_posneg, forecast_uni, BeliefMatrix, LagWindow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// x leads y.
    #[default]
    Uni,
    /// Either series may lead; column 1 is x-leads, column 2 y-leads.
    Bidirectional,
    /// x leads y with positive (column 1) or negative (column 2) sign.
    Posneg,
}

impl std::str::FromStr for Variant {
    type Err = SdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Variant::Uni),
            "bidirectional" => Ok(Variant::Bidirectional),
            "posneg" => Ok(Variant::Posneg),
            other => Err(SdmError::InvalidConfiguration(format!(
                "unknown variant `{other}` (expected uni, bidirectional or posneg)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Uni => "uni",
            Variant::Bidirectional => "bidirectional",
            Variant::Posneg => "posneg",
        })
    }
}

/// Everything known about one processed time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based time index.
    pub t: usize,
    pub x: f64,
    pub y: f64,
    /// Forecast of `y_t` made before `y_t` was observed.
    pub y_hat: Option<f64>,
    /// Forecast of `x_t` (bi-directional variant only).
    pub x_hat: Option<f64>,
    pub theta: f64,
    pub lambda: f64,
    pub transition_error: f64,
    pub weighted_residual: f64,
    /// Posterior after observing step `t`, column-major (`N_s` or `2 N_s` entries).
    pub weights: Vec<f64>,
}

impl StepRecord {
    /// Most probable lag (1-based) within the dominant column, and that column.
    pub fn argmax(&self, n_states: usize) -> (usize, usize) {
        let best = crate::belief::argmax(&self.weights);
        (best % n_states + 1, best / n_states)
    }

    pub fn column_mass(&self, n_states: usize, column: usize) -> f64 {
        self.weights[column * n_states..(column + 1) * n_states]
            .iter()
            .sum()
    }
}

fn check_inputs(x: &[f64], y: &[f64], config: &FilterConfig) -> Result<()> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(SdmError::length_mismatch("series pair", x.len(), y.len()));
    }
    if x.len() <= config.n_states {
        return Err(SdmError::InvalidArgument(format!(
            "series of length {} too short for {} lag states",
            x.len(),
            config.n_states
        )));
    }
    if let Some((i, _)) = x.iter().chain(y).enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SdmError::InvalidArgument(format!(
            "non-finite value at position {}",
            i % x.len() + 1
        )));
    }
    Ok(())
}

/// Streams `(x, y)` through the chosen filter variant.
pub fn run_pair(
    x: &[f64],
    y: &[f64],
    variant: Variant,
    config: &FilterConfig,
) -> Result<Vec<StepRecord>> {
    check_inputs(x, y, config)?;
    match variant {
        Variant::Uni => drive(
            FilterState::new(*config)?,
            x,
            y,
            |beliefs: &BeliefVector, t| {
                let window = LagWindow::from_history(&x[..t], config.n_states)?;
                Ok(Forecast {
                    y_hat: Some(forecast_uni(beliefs, &window)?),
                    x_hat: None,
                    distances: distances_uni(&window, y[t])?,
                })
            },
        ),
        Variant::Posneg => drive(
            FilterState::new_matrix(*config)?,
            x,
            y,
            |beliefs: &BeliefMatrix, t| {
                let window = LagWindow::from_history(&x[..t], config.n_states)?;
                Ok(Forecast {
                    y_hat: Some(forecast_posneg(beliefs, &window)?),
                    x_hat: None,
                    distances: distances_posneg(&window, y[t])?,
                })
            },
        ),
        Variant::Bidirectional => drive(
            FilterState::new_matrix(*config)?,
            x,
            y,
            |beliefs: &BeliefMatrix, t| {
                let x_window = LagWindow::from_history(&x[..t], config.n_states)?;
                let y_window = LagWindow::from_history(&y[..t], config.n_states)?;
                let f = forecast_bidirectional(beliefs, &x_window, &y_window, config.floor)?;
                Ok(Forecast {
                    y_hat: f.y_hat,
                    x_hat: f.x_hat,
                    distances: distances_bidirectional(&x_window, &y_window, x[t], y[t])?,
                })
            },
        ),
    }
}

struct Forecast<D> {
    y_hat: Option<f64>,
    x_hat: Option<f64>,
    distances: D,
}

fn drive<B, D, F>(
    mut state: FilterState<B>,
    x: &[f64],
    y: &[f64],
    mut forecast: F,
) -> Result<Vec<StepRecord>>
where
    B: BeliefGrid,
    D: DistanceGrid,
    F: FnMut(&B, usize) -> Result<Forecast<D>>,
{
    let n = state.config.n_states;
    let mut records = Vec::with_capacity(x.len() - n);
    for t in n..x.len() {
        let f = forecast(&state.beliefs, t)?;
        let (next, diag) = step(state, &f.distances)?;
        state = next;
        records.push(StepRecord {
            t: t + 1,
            x: x[t],
            y: y[t],
            y_hat: f.y_hat,
            x_hat: f.x_hat,
            theta: diag.theta,
            lambda: diag.lambda,
            transition_error: diag.transition_error,
            weighted_residual: diag.weighted_residual,
            weights: state.beliefs.flat(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{make_pair, Family, SimConfig};

    fn small_config() -> FilterConfig {
        FilterConfig {
            n_states: 10,
            ..FilterConfig::default()
        }
    }

    #[test]
    fn records_start_after_full_window() {
        let pair = make_pair(SimConfig::new(Family::F5, 100, 0.1, 3)).unwrap();
        let recs = run_pair(&pair.x, &pair.y, Variant::Uni, &small_config()).unwrap();
        assert_eq!(recs.len(), 90);
        assert_eq!(recs[0].t, 11);
        // First forecast uses uniform weights.
        let mean: f64 = pair.x[..10].iter().sum::<f64>() / 10.0;
        assert!((recs[0].y_hat.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_or_ragged_input() {
        let cfg = small_config();
        assert!(run_pair(&[0.0; 10], &[0.0; 10], Variant::Uni, &cfg).is_err());
        assert!(run_pair(&[0.0; 20], &[0.0; 19], Variant::Uni, &cfg).is_err());
        let mut x = vec![0.5; 20];
        x[4] = f64::NAN;
        let err = run_pair(&x, &[0.5; 20], Variant::Uni, &cfg).unwrap_err();
        assert!(err.to_string().contains("position 5"), "{err}");
    }

    #[test]
    fn variants_produce_expected_widths() {
        let pair = make_pair(SimConfig::new(Family::F5, 60, 0.1, 3)).unwrap();
        let cfg = small_config();
        for (variant, width) in [
            (Variant::Uni, 10),
            (Variant::Bidirectional, 20),
            (Variant::Posneg, 20),
        ] {
            let recs = run_pair(&pair.x, &pair.y, variant, &cfg).unwrap();
            assert!(recs.iter().all(|r| r.weights.len() == width));
            assert!(recs
                .iter()
                .all(|r| (r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn argmax_reports_lag_and_column() {
        let rec = StepRecord {
            t: 1,
            x: 0.0,
            y: 0.0,
            y_hat: None,
            x_hat: None,
            theta: 0.0,
            lambda: 1.0,
            transition_error: 0.0,
            weighted_residual: 0.0,
            weights: vec![0.1, 0.1, 0.1, 0.1, 0.5, 0.1],
        };
        assert_eq!(rec.argmax(3), (2, 1));
        assert!((rec.column_mass(3, 1) - 0.7).abs() < 1e-12);
    }
}
