//! Distance construction, exponential likelihoods and forecast rules for the
//! uni-directional, bi-directional and positive/negative models.
//!
//! All distances are squared differences between the lagging series and the
//! lagged values of the leading series. The forecast rules for the two-column
//! models are extensions: the joint normalisation of a [`BeliefMatrix`] does
//! not by itself define a forecast, so each rule documents its own reading.

use crate::belief::{
    check_distribution, normalize_floored, predict_column, BeliefGrid, BeliefVector, DistanceGrid,
    FilterConfig, FilterState, PredictedWeights,
};
use crate::error::{Result, SdmError};

fn check_distances(values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(SdmError::InvalidArgument(format!(
            "distances must be finite and non-negative, found {bad}"
        )));
    }
    Ok(())
}

/// Squared distance between `y_t` and `x_{t-i}` for each lag `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    distances: Vec<f64>,
}

impl DistanceVector {
    pub fn new(distances: Vec<f64>) -> Result<Self> {
        check_distances(&distances)?;
        Ok(Self { distances })
    }

    pub fn values(&self) -> &[f64] {
        &self.distances
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

impl DistanceGrid for DistanceVector {
    fn columns(&self) -> &[Vec<f64>] {
        std::slice::from_ref(&self.distances)
    }
}

/// Two distance columns. Column 1 is the x-leads (or positive) direction,
/// column 2 the y-leads (or negative) direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    columns: [Vec<f64>; 2],
}

impl DistanceMatrix {
    pub fn new(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(SdmError::length_mismatch(
                "distance matrix columns",
                first.len(),
                second.len(),
            ));
        }
        check_distances(&first)?;
        check_distances(&second)?;
        Ok(Self {
            columns: [first, second],
        })
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn n_states(&self) -> usize {
        self.columns[0].len()
    }
}

impl DistanceGrid for DistanceMatrix {
    fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

/// Beliefs over two columns of lags, normalised jointly over all entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefMatrix {
    columns: [Vec<f64>; 2],
}

impl BeliefMatrix {
    /// Equal mass `1 / (2 N_s)` on every entry.
    pub fn uniform(n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(SdmError::InvalidConfiguration(
                "a belief matrix needs at least one lag".into(),
            ));
        }
        let w = 0.5 / n_states as f64;
        Ok(Self {
            columns: [vec![w; n_states], vec![w; n_states]],
        })
    }

    pub fn from_columns(first: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if first.len() != second.len() || first.is_empty() {
            return Err(SdmError::length_mismatch(
                "belief matrix columns",
                first.len(),
                second.len(),
            ));
        }
        check_distribution(&[first.as_slice(), second.as_slice()].concat())?;
        Ok(Self {
            columns: [first, second],
        })
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Raw (un-renormalised) mass of column `j`.
    pub fn column_mass(&self, j: usize) -> f64 {
        self.columns[j].iter().sum()
    }

    pub fn n_states(&self) -> usize {
        self.columns[0].len()
    }

    /// Column (0 or 1) holding the larger share of the mass.
    pub fn dominant_column(&self) -> usize {
        usize::from(self.column_mass(1) > self.column_mass(0))
    }
}

impl BeliefGrid for BeliefMatrix {
    fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let [first, second]: [Vec<f64>; 2] = columns
            .try_into()
            .expect("belief matrix step must produce two columns");
        Self {
            columns: [first, second],
        }
    }
}

impl FilterState<BeliefMatrix> {
    /// Two-column filter with uniform beliefs.
    pub fn new_matrix(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::with_beliefs(
            BeliefMatrix::uniform(config.n_states)?,
            config,
        ))
    }
}

/// The `N_s` most recent values of a series; position `i - 1` holds lag `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagWindow {
    values: Vec<f64>,
}

impl LagWindow {
    /// Window ending just before `history.len()`, i.e. lag 1 is the last element.
    pub fn from_history(history: &[f64], n_states: usize) -> Result<Self> {
        if n_states == 0 || history.len() < n_states {
            return Err(SdmError::InvalidArgument(format!(
                "lag window needs {n_states} values of history, got {}",
                history.len()
            )));
        }
        Ok(Self {
            values: history.iter().rev().take(n_states).copied().collect(),
        })
    }

    /// Wraps values already ordered by lag (lag 1 first).
    pub fn from_lagged(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SdmError::InvalidArgument("empty lag window".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at 1-based `lag`.
    pub fn at_lag(&self, lag: usize) -> f64 {
        self.values[lag - 1]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn squared_gaps(window: &LagWindow, now: f64, sign: f64) -> Vec<f64> {
    window
        .values
        .iter()
        .map(|v| {
            let gap = now - sign * v;
            gap * gap
        })
        .collect()
}

pub fn distances_uni(window: &LagWindow, y_now: f64) -> Result<DistanceVector> {
    DistanceVector::new(squared_gaps(window, y_now, 1.0))
}

/// Exponential density `lambda * exp(-lambda * distance)`.
pub fn likelihood(distance: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SdmError::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    if !(distance >= 0.0) {
        return Err(SdmError::InvalidParameter {
            name: "distance",
            value: distance,
        });
    }
    Ok(lambda * (-lambda * distance).exp())
}

/// Likelihoods evaluated at `d - min(d)`. They differ from the raw densities by
/// a common factor that cancels in normalisation, and the best entry is
/// always `lambda`, so the products cannot all underflow.
pub(crate) fn relative_likelihoods(distances: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    distances
        .iter()
        .map(|d| likelihood(d - min, lambda))
        .collect()
}

/// Belief-weighted squared residual `w . d`.
pub fn weighted_residual(weights: &BeliefVector, distances: &DistanceVector) -> Result<f64> {
    dot("weighted residual", weights.weights(), distances.values())
}

fn dot(what: &str, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(SdmError::length_mismatch(what, a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn distances_bidirectional(
    x_window: &LagWindow,
    y_window: &LagWindow,
    x_now: f64,
    y_now: f64,
) -> Result<DistanceMatrix> {
    DistanceMatrix::new(
        squared_gaps(x_window, y_now, 1.0),
        squared_gaps(y_window, x_now, 1.0),
    )
}

pub fn distances_posneg(window: &LagWindow, y_now: f64) -> Result<DistanceMatrix> {
    DistanceMatrix::new(
        squared_gaps(window, y_now, 1.0),
        squared_gaps(window, y_now, -1.0),
    )
}

/// Joint update of both columns: products are normalised over all `2 N_s`
/// entries, then floored.
pub fn update_matrix(
    predicted: [&PredictedWeights; 2],
    distances: &DistanceMatrix,
    lambda: f64,
    floor: f64,
) -> Result<BeliefMatrix> {
    let n = distances.n_states();
    for p in predicted {
        if p.weights().len() != n {
            return Err(SdmError::length_mismatch(
                "update_matrix",
                p.weights().len(),
                n,
            ));
        }
    }
    if !(floor >= 0.0) || floor * (2 * n) as f64 >= 1.0 {
        return Err(SdmError::InvalidParameter {
            name: "floor",
            value: floor,
        });
    }
    let flat_pred = [predicted[0].weights(), predicted[1].weights()].concat();
    let flat_dist = [distances.column(0), distances.column(1)].concat();
    let lik = relative_likelihoods(&flat_dist, lambda)?;
    let products = flat_pred.iter().zip(&lik).map(|(w, l)| w * l).collect();
    let mut flat = normalize_floored(products, floor)?;
    let second = flat.split_off(n);
    Ok(BeliefMatrix {
        columns: [flat, second],
    })
}

/// Diffuses each column of a belief matrix independently.
pub fn predict_matrix(
    prior: &BeliefMatrix,
    theta: f64,
    sweep: crate::belief::SweepMode,
) -> Result<[PredictedWeights; 2]> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(SdmError::InvalidParameter {
            name: "theta",
            value: theta,
        });
    }
    Ok([
        PredictedWeights::new(predict_column(prior.column(0), theta, sweep))?,
        PredictedWeights::new(predict_column(prior.column(1), theta, sweep))?,
    ])
}

/// `W . D` over both columns.
pub fn joint_rate_residual(weights: &BeliefMatrix, distances: &DistanceMatrix) -> Result<f64> {
    if weights.n_states() != distances.n_states() {
        return Err(SdmError::length_mismatch(
            "joint residual",
            weights.n_states(),
            distances.n_states(),
        ));
    }
    Ok(
        dot("joint residual", weights.column(0), distances.column(0))?
            + dot("joint residual", weights.column(1), distances.column(1))?,
    )
}

/// One-step-ahead forecast `w_{t-1} . x_{t-N_s:t-1}`.
pub fn forecast_uni(weights: &BeliefVector, window: &LagWindow) -> Result<f64> {
    dot("forecast", weights.weights(), window.values())
}

/// Positive/negative forecast: the positive column contributes `+x`, the
/// negative column `-x`.
pub fn forecast_posneg(weights: &BeliefMatrix, window: &LagWindow) -> Result<f64> {
    Ok(dot("forecast", weights.column(0), window.values())?
        - dot("forecast", weights.column(1), window.values())?)
}

/// Forecasts from the two-column bi-directional model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidirectionalForecast {
    /// Forecast of y from lagged x, `None` when the x-leads column is at floor level.
    pub y_hat: Option<f64>,
    /// Forecast of x from lagged y, `None` when the y-leads column is at floor level.
    pub x_hat: Option<f64>,
    pub x_leads_mass: f64,
    pub y_leads_mass: f64,
}

/// Each column is renormalised to a probability vector before forecasting.
/// A column whose mass does not exceed `2 N_s floor` carries no information
/// and yields `None`.
pub fn forecast_bidirectional(
    weights: &BeliefMatrix,
    x_window: &LagWindow,
    y_window: &LagWindow,
    floor: f64,
) -> Result<BidirectionalForecast> {
    let threshold = 2.0 * weights.n_states() as f64 * floor;
    let x_leads_mass = weights.column_mass(0);
    let y_leads_mass = weights.column_mass(1);
    let column_forecast = |j: usize, mass: f64, window: &LagWindow| -> Result<Option<f64>> {
        if mass <= threshold {
            return Ok(None);
        }
        Ok(Some(
            dot("forecast", weights.column(j), window.values())? / mass,
        ))
    };
    Ok(BidirectionalForecast {
        y_hat: column_forecast(0, x_leads_mass, x_window)?,
        x_hat: column_forecast(1, y_leads_mass, y_window)?,
        x_leads_mass,
        y_leads_mass,
    })
}
