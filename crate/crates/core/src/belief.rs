//! Belief state and the model-agnostic prediction/update recursion.
//!
//! The filter keeps a probability mass over the candidate lags `1..=N_s`
//! (one column for the uni-directional model, two columns for the
//! bi-directional and positive/negative models). Each step:
//!
//! 1. takes the diffusion magnitude `theta` as the median of past transition
//!    errors and the exponential rate `lambda` as the reciprocal of the mean
//!    weighted squared residual,
//! 2. diffuses the prior to neighbouring lags (`predict`),
//! 3. multiplies by per-lag likelihoods `lambda * exp(-lambda * d)` and
//!    renormalises with a probability floor (`update`),
//! 4. records the L1 transition error and the prior-weighted residual.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};
use crate::measurement::relative_likelihoods;

/// Lower bound applied to every posterior weight.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Number of candidate lags used by the benchmark runs.
pub const DEFAULT_STATES: usize = 30;

/// Rate used before any residual has been observed.
pub const COLD_START_RATE: f64 = 1.0;

/// How the `i + 1` neighbour is read during the prediction sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Reversed in-place sweep: the `i + 1` term reads the already predicted weight.
    #[default]
    Pseudocode,
    /// Every neighbour term reads the prior.
    FreshBuffer,
}

impl std::str::FromStr for SweepMode {
    type Err = SdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudocode" => Ok(SweepMode::Pseudocode),
            "fresh-buffer" => Ok(SweepMode::FreshBuffer),
            other => Err(SdmError::InvalidConfiguration(format!(
                "unknown sweep mode `{other}` (expected pseudocode or fresh-buffer)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepMode::Pseudocode => f.write_str("pseudocode"),
            SweepMode::FreshBuffer => f.write_str("fresh-buffer"),
        }
    }
}

/// Static filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub n_states: usize,
    pub floor: f64,
    pub sweep: SweepMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_states: DEFAULT_STATES,
            floor: DEFAULT_FLOOR,
            sweep: SweepMode::Pseudocode,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 {
            return Err(SdmError::InvalidConfiguration(format!(
                "n_states must be at least 2, got {}",
                self.n_states
            )));
        }
        check_floor(self.floor, self.n_states)
    }
}

fn check_floor(floor: f64, entries: usize) -> Result<()> {
    if !(floor >= 0.0) || floor * entries as f64 >= 1.0 {
        return Err(SdmError::InvalidParameter {
            name: "floor",
            value: floor,
        });
    }
    Ok(())
}

/// Probability over lags `1..=N_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    weights: Vec<f64>,
}

impl BeliefVector {
    /// Uniform beliefs over `n_states` lags.
    pub fn uniform(n_states: usize) -> Result<Self> {
        if n_states < 2 {
            return Err(SdmError::InvalidConfiguration(format!(
                "n_states must be at least 2, got {n_states}"
            )));
        }
        Ok(Self {
            weights: vec![1.0 / n_states as f64; n_states],
        })
    }

    /// Wraps explicit weights; they must be non-negative and sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(SdmError::InvalidConfiguration(format!(
                "a belief vector needs at least 2 states, got {}",
                weights.len()
            )));
        }
        check_distribution(&weights)?;
        Ok(Self { weights })
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_states(&self) -> usize {
        self.weights.len()
    }

    /// Most probable lag, 1-based.
    pub fn argmax_lag(&self) -> usize {
        argmax(&self.weights) + 1
    }
}

pub(crate) fn check_distribution(weights: &[f64]) -> Result<()> {
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(SdmError::InvalidArgument(format!(
            "weights must be finite and non-negative, found {bad}"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SdmError::InvalidArgument(format!(
            "weights must sum to 1, got {total}"
        )));
    }
    Ok(())
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Uniform starting beliefs.
pub fn init_beliefs(n_states: usize) -> Result<BeliefVector> {
    BeliefVector::uniform(n_states)
}

/// Diffused prior. Its entries are relative weights and sum to more than one
/// whenever `theta > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedWeights {
    weights: Vec<f64>,
}

impl PredictedWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(SdmError::InvalidArgument(format!(
                "predicted weights must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.weights
    }
}

pub(crate) fn predict_column(prior: &[f64], theta: f64, sweep: SweepMode) -> Vec<f64> {
    let n = prior.len();
    let share = theta / 3.0;
    let mut out = vec![0.0; n];
    for i in (0..n).rev() {
        let below = if i == 0 { 0.0 } else { prior[i - 1] };
        let above = match (sweep, i + 1 < n) {
            (_, false) => 0.0,
            (SweepMode::Pseudocode, true) => out[i + 1],
            (SweepMode::FreshBuffer, true) => prior[i + 1],
        };
        out[i] = prior[i] + share * (below + prior[i] + above);
    }
    out
}

/// Spreads belief mass to neighbouring lags with magnitude `theta`.
pub fn predict(prior: &BeliefVector, theta: f64, sweep: SweepMode) -> Result<PredictedWeights> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(SdmError::InvalidParameter {
            name: "theta",
            value: theta,
        });
    }
    Ok(PredictedWeights {
        weights: predict_column(&prior.weights, theta, sweep),
    })
}

/// Normalises `products` to a probability vector in which every entry is at
/// least `floor`. Entries pinned at the floor stay exactly at the floor; the
/// remaining mass is rescaled proportionally.
pub(crate) fn normalize_floored(mut products: Vec<f64>, floor: f64) -> Result<Vec<f64>> {
    let total: f64 = products.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(SdmError::DegenerateUpdate { step: 0 });
    }
    for p in products.iter_mut() {
        *p /= total;
    }
    if floor == 0.0 {
        return Ok(products);
    }

    let mut pinned: Vec<bool> = products.iter().map(|&p| p < floor).collect();
    loop {
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        let free: f64 = products
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(v, _)| v)
            .sum();
        let scale = (1.0 - pinned_count as f64 * floor) / free;
        let mut changed = false;
        for (v, p) in products.iter().zip(pinned.iter_mut()) {
            if !*p && v * scale < floor {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            for (v, p) in products.iter_mut().zip(&pinned) {
                *v = if *p { floor } else { *v * scale };
            }
            return Ok(products);
        }
    }
}

/// Bayes update of the predicted weights with per-lag likelihoods.
pub fn update(
    predicted: &PredictedWeights,
    likelihoods: &[f64],
    floor: f64,
) -> Result<BeliefVector> {
    let n = predicted.weights.len();
    if likelihoods.len() != n {
        return Err(SdmError::length_mismatch("update", n, likelihoods.len()));
    }
    if let Some(bad) = likelihoods.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(SdmError::InvalidArgument(format!(
            "likelihoods must be finite and positive, found {bad}"
        )));
    }
    check_floor(floor, n)?;
    let products = predicted
        .weights
        .iter()
        .zip(likelihoods)
        .map(|(w, l)| w * l)
        .collect();
    Ok(BeliefVector::from_raw(normalize_floored(products, floor)?))
}

pub(crate) fn l1_distance(prev: &[f64], curr: &[f64]) -> f64 {
    prev.iter().zip(curr).map(|(a, b)| (a - b).abs()).sum()
}

/// L1 distance between consecutive belief vectors, in `[0, 2]`.
pub fn observe_transition_error(prev: &BeliefVector, curr: &BeliefVector) -> Result<f64> {
    if prev.n_states() != curr.n_states() {
        return Err(SdmError::length_mismatch(
            "transition error",
            prev.n_states(),
            curr.n_states(),
        ));
    }
    Ok(l1_distance(&prev.weights, &curr.weights))
}

/// History of transition errors; `theta` is their median.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffusionEstimator {
    history: Vec<f64>,
    sorted: Vec<f64>,
}

impl DiffusionEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_history(values: &[f64]) -> Result<Self> {
        let mut est = Self::new();
        for &v in values {
            est.record(v)?;
        }
        Ok(est)
    }

    /// Stores one transition error. Rounding can push a legitimate L1 distance
    /// a hair past 2, so values are clamped after a loose range check.
    pub fn record(&mut self, v: f64) -> Result<()> {
        if !(-1e-9..=2.0 + 1e-9).contains(&v) {
            return Err(SdmError::OutOfRange(format!("transition error {v}")));
        }
        let v = v.clamp(0.0, 2.0);
        let at = self.sorted.partition_point(|&s| s < v);
        self.sorted.insert(at, v);
        self.history.push(v);
        Ok(())
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Median of the recorded errors, 0 when nothing has been recorded.
    pub fn theta(&self) -> f64 {
        let n = self.sorted.len();
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => self.sorted[n / 2],
            _ => 0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2]),
        };
        median.clamp(0.0, 2.0)
    }
}

pub fn estimate_theta(diffusion: &DiffusionEstimator) -> f64 {
    diffusion.theta()
}

/// Running mean of weighted squared residuals; `lambda` is its reciprocal.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateEstimator {
    residual_sum: f64,
    count: usize,
}

impl RateEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, residual: f64) -> Result<()> {
        if !(residual >= 0.0) || !residual.is_finite() {
            return Err(SdmError::InvalidParameter {
                name: "residual",
                value: residual,
            });
        }
        self.residual_sum += residual;
        self.count += 1;
        Ok(())
    }

    pub fn residual_sum(&self) -> f64 {
        self.residual_sum
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Falls back to [`COLD_START_RATE`] until a positive residual has been seen.
    pub fn lambda(&self) -> f64 {
        if self.residual_sum > 0.0 {
            self.count as f64 / self.residual_sum
        } else {
            COLD_START_RATE
        }
    }
}

/// A grid of belief columns over lags `1..=N_s`.
pub trait BeliefGrid: Clone {
    fn columns(&self) -> &[Vec<f64>];

    /// Builds the grid from columns produced by the filter step.
    fn from_columns(columns: Vec<Vec<f64>>) -> Self;

    fn flat(&self) -> Vec<f64> {
        self.columns().concat()
    }
}

impl BeliefGrid for BeliefVector {
    fn columns(&self) -> &[Vec<f64>] {
        std::slice::from_ref(&self.weights)
    }

    fn from_columns(mut columns: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(columns.len(), 1);
        BeliefVector::from_raw(columns.swap_remove(0))
    }
}

/// Per-lag squared distances matching a [`BeliefGrid`] column for column.
pub trait DistanceGrid {
    fn columns(&self) -> &[Vec<f64>];
}

/// Full loop state of one filter instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<B> {
    pub beliefs: B,
    pub diffusion: DiffusionEstimator,
    pub rate: RateEstimator,
    pub step_index: usize,
    pub config: FilterConfig,
}

impl FilterState<BeliefVector> {
    /// Uni-directional filter with uniform beliefs.
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self::with_beliefs(
            BeliefVector::uniform(config.n_states)?,
            config,
        ))
    }
}

impl<B: BeliefGrid> FilterState<B> {
    pub fn with_beliefs(beliefs: B, config: FilterConfig) -> Self {
        Self {
            beliefs,
            diffusion: DiffusionEstimator::new(),
            rate: RateEstimator::new(),
            step_index: 0,
            config,
        }
    }
}

/// Quantities produced by one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics<B> {
    /// 1-based index of the step just processed.
    pub step: usize,
    pub theta: f64,
    pub lambda: f64,
    pub transition_error: f64,
    pub weighted_residual: f64,
    pub posterior: B,
}

/// One full predict/update iteration.
pub fn step<B, D>(
    state: FilterState<B>,
    distances: &D,
) -> Result<(FilterState<B>, StepDiagnostics<B>)>
where
    B: BeliefGrid,
    D: DistanceGrid + ?Sized,
{
    let FilterState {
        beliefs,
        mut diffusion,
        mut rate,
        step_index,
        config,
    } = state;
    let step = step_index + 1;

    let prior_cols = beliefs.columns();
    let dist_cols = distances.columns();
    if prior_cols.len() != dist_cols.len() {
        return Err(SdmError::InvalidArgument(format!(
            "step {step}: {} belief columns but {} distance columns",
            prior_cols.len(),
            dist_cols.len()
        )));
    }
    for (p, d) in prior_cols.iter().zip(dist_cols) {
        if p.len() != d.len() {
            return Err(SdmError::length_mismatch(
                "step distances",
                p.len(),
                d.len(),
            ));
        }
    }

    let theta = diffusion.theta();
    let lambda = rate.lambda();

    let predicted: Vec<f64> = prior_cols
        .iter()
        .flat_map(|col| predict_column(col, theta, config.sweep))
        .collect();
    let flat_distances: Vec<f64> = dist_cols.concat();
    let likelihoods = relative_likelihoods(&flat_distances, lambda)?;
    let products = predicted
        .iter()
        .zip(&likelihoods)
        .map(|(w, l)| w * l)
        .collect();
    let posterior_flat = normalize_floored(products, config.floor).map_err(|e| e.at_step(step))?;

    let prior_flat = beliefs.flat();
    let transition_error = l1_distance(&prior_flat, &posterior_flat);
    let weighted_residual: f64 = prior_flat
        .iter()
        .zip(&flat_distances)
        .map(|(w, d)| w * d)
        .sum();
    diffusion.record(transition_error)?;
    rate.record(weighted_residual)?;

    let mut columns = Vec::with_capacity(prior_cols.len());
    let mut offset = 0;
    for col in prior_cols {
        columns.push(posterior_flat[offset..offset + col.len()].to_vec());
        offset += col.len();
    }
    let posterior = B::from_columns(columns);

    let diagnostics = StepDiagnostics {
        step,
        theta,
        lambda,
        transition_error,
        weighted_residual,
        posterior: posterior.clone(),
    };
    let next = FilterState {
        beliefs: posterior,
        diffusion,
        rate,
        step_index: step,
        config,
    };
    Ok((next, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::DistanceVector;
    fn assert_close(a: impl AsRef<[f64]>, b: impl AsRef<[f64]>, tol: f64) {
        let (a, b) = (a.as_ref(), b.as_ref());
        assert_eq!(a.len(), b.len(), "length mismatch");
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!((x - y).abs() <= tol, "index {i}: {x} vs {y}");
        }
    }

    /// Hand-written sweep used as the oracle for `predict`.
    fn sweep_oracle(prior: &[f64], theta: f64) -> Vec<f64> {
        let n = prior.len();
        let mut padded_prior = vec![0.0; n + 2];
        padded_prior[1..=n].copy_from_slice(prior);
        let mut pred = vec![0.0; n + 2];
        let mut i = n;
        while i >= 1 {
            pred[i] = padded_prior[i]
                + theta / 3.0 * (padded_prior[i - 1] + padded_prior[i] + pred[i + 1]);
            i -= 1;
        }
        pred[1..=n].to_vec()
    }

    #[test]
    fn init_beliefs_is_uniform() {
        assert_eq!(init_beliefs(4).unwrap().weights(), &[0.25; 4]);
        assert_eq!(init_beliefs(2).unwrap().weights(), &[0.5; 2]);
        let b = init_beliefs(30).unwrap();
        assert_eq!(b.n_states(), 30);
        assert!(b.weights().iter().all(|&w| w == 1.0 / 30.0));
        assert!(matches!(
            init_beliefs(1),
            Err(SdmError::InvalidConfiguration(_))
        ));
        assert!(init_beliefs(0).is_err());
    }

    #[test]
    fn predict_zero_theta_is_identity() {
        let prior = BeliefVector::from_weights(vec![1.0 / 3.0; 3]).unwrap();
        let p = predict(&prior, 0.0, SweepMode::Pseudocode).unwrap();
        assert_eq!(p.weights(), prior.weights());
    }

    #[test]
    fn predict_matches_hand_sweep() {
        let cases = [
            (vec![1.0, 0.0, 0.0], [1.11, 0.1, 0.0]),
            (vec![0.0, 1.0, 0.0], [0.111, 1.11, 0.1]),
        ];
        for (prior, expected) in cases {
            let oracle = sweep_oracle(&prior, 0.3);
            assert_close(&oracle, expected, 1e-12);
            let p = predict(
                &BeliefVector::from_weights(prior).unwrap(),
                0.3,
                SweepMode::Pseudocode,
            )
            .unwrap();
            assert_close(p.weights(), oracle, 1e-15);
        }
    }

    #[test]
    fn predict_fresh_buffer_reads_prior() {
        let prior = BeliefVector::from_weights(vec![0.0, 1.0, 0.0]).unwrap();
        let p = predict(&prior, 0.3, SweepMode::FreshBuffer).unwrap();
        // i=1: 0 + 0.1*(0+0+1); i=2: 1 + 0.1*(0+1+0); i=3: 0 + 0.1*(1+0+0)
        assert_close(p.weights(), [0.1, 1.1, 0.1], 1e-12);
    }

    #[test]
    fn predict_rejects_negative_theta() {
        let prior = BeliefVector::uniform(3).unwrap();
        assert!(matches!(
            predict(&prior, -0.1, SweepMode::Pseudocode),
            Err(SdmError::InvalidParameter { name: "theta", .. })
        ));
        assert!(predict(&prior, f64::NAN, SweepMode::Pseudocode).is_err());
    }

    #[test]
    fn update_examples() {
        let p = PredictedWeights::new(vec![0.5, 0.5]).unwrap();
        assert_close(
            update(&p, &[1.0, 1.0], DEFAULT_FLOOR).unwrap().weights(),
            [0.5, 0.5],
            1e-15,
        );

        let p = PredictedWeights::new(vec![0.2, 0.8]).unwrap();
        assert_close(
            update(&p, &[4.0, 1.0], DEFAULT_FLOOR).unwrap().weights(),
            [0.5, 0.5],
            1e-15,
        );

        let p = PredictedWeights::new(vec![1.0 / 3.0; 3]).unwrap();
        assert_close(
            update(&p, &[2.0, 1.0, 1.0], DEFAULT_FLOOR)
                .unwrap()
                .weights(),
            [0.5, 0.25, 0.25],
            1e-15,
        );
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let p = PredictedWeights::new(vec![0.5, 0.5]).unwrap();
        assert!(update(&p, &[1.0], DEFAULT_FLOOR).is_err());
        assert!(update(&p, &[1.0, 0.0], DEFAULT_FLOOR).is_err());
        let zero = PredictedWeights::new(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            update(&zero, &[1.0, 1.0], DEFAULT_FLOOR),
            Err(SdmError::DegenerateUpdate { .. })
        ));
        // Products underflow to zero.
        let tiny = PredictedWeights::new(vec![1e-300, 1e-300]).unwrap();
        assert!(matches!(
            update(&tiny, &[1e-300, 1e-300], DEFAULT_FLOOR),
            Err(SdmError::DegenerateUpdate { .. })
        ));
    }

    #[test]
    fn floor_pins_small_entries_exactly() {
        let p = PredictedWeights::new(vec![1.0, 1e-20, 1e-30, 0.5]).unwrap();
        let b = update(&p, &[1.0; 4], 1e-12).unwrap();
        assert_eq!(b.weights()[1], 1e-12);
        assert_eq!(b.weights()[2], 1e-12);
        assert!((b.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(b.weights().iter().all(|&w| w >= 1e-12));
    }

    #[test]
    fn transition_error_examples() {
        let a = BeliefVector::from_weights(vec![0.5, 0.5]).unwrap();
        assert_eq!(observe_transition_error(&a, &a).unwrap(), 0.0);
        let e1 = BeliefVector::from_weights(vec![1.0, 0.0]).unwrap();
        let e2 = BeliefVector::from_weights(vec![0.0, 1.0]).unwrap();
        assert_eq!(observe_transition_error(&e1, &e2).unwrap(), 2.0);
        let b = BeliefVector::from_weights(vec![0.75, 0.25]).unwrap();
        assert_eq!(observe_transition_error(&a, &b).unwrap(), 0.5);
        let c = BeliefVector::uniform(3).unwrap();
        assert!(observe_transition_error(&a, &c).is_err());
    }

    #[test]
    fn theta_examples() {
        assert_eq!(estimate_theta(&DiffusionEstimator::new()), 0.0);
        let d = DiffusionEstimator::from_history(&[0.4, 0.1, 0.2]).unwrap();
        assert_eq!(estimate_theta(&d), 0.2);
        let d = DiffusionEstimator::from_history(&[0.1, 0.3]).unwrap();
        assert!((estimate_theta(&d) - 0.2).abs() < 1e-15);
        assert!(DiffusionEstimator::from_history(&[2.5]).is_err());
        assert!(DiffusionEstimator::from_history(&[-0.5]).is_err());
    }

    #[test]
    fn rate_cold_start_and_mean() {
        let mut r = RateEstimator::new();
        assert_eq!(r.lambda(), 1.0);
        r.record(0.5).unwrap();
        r.record(1.5).unwrap();
        assert_eq!(r.lambda(), 1.0);
        r.record(2.0).unwrap();
        assert_eq!(r.lambda(), 0.75);
        assert!(r.record(-1.0).is_err());
    }

    #[test]
    fn step_symmetric_distances_keep_uniform() {
        let state = FilterState::new(FilterConfig {
            n_states: 4,
            ..FilterConfig::default()
        })
        .unwrap();
        let d = DistanceVector::new(vec![2.0; 4]).unwrap();
        let (state, diag) = step(state, &d).unwrap();
        assert_close(diag.posterior.weights(), [0.25; 4], 1e-15);
        assert_eq!(diag.transition_error, 0.0);
        assert_eq!(diag.theta, 0.0);
        assert_eq!(diag.lambda, 1.0);
        assert_eq!(diag.weighted_residual, 2.0);
        assert_eq!(state.diffusion.theta(), 0.0);
        assert_eq!(state.step_index, 1);
    }

    #[test]
    fn step_agreement_keeps_one_hot() {
        let floor = DEFAULT_FLOOR;
        let mut w = vec![floor; 5];
        w[2] = 1.0 - 4.0 * floor;
        let beliefs = BeliefVector::from_weights(w).unwrap();
        let config = FilterConfig {
            n_states: 5,
            ..FilterConfig::default()
        };
        let state = FilterState::with_beliefs(beliefs, config);
        let d = DistanceVector::new(vec![3.0, 2.0, 0.0, 1.0, 4.0]).unwrap();
        let (_, diag) = step(state, &d).unwrap();
        assert_eq!(diag.posterior.argmax_lag(), 3);
        assert!(diag.posterior.weights()[2] > 1.0 - 5.0 * floor);
        assert!(diag.transition_error <= 5.0 * floor);
    }

    #[test]
    fn step_posterior_matches_closed_form() {
        // Uniform prior, theta = 0, lambda = 1: posterior_i = exp(-d_i) / sum_j exp(-d_j).
        let big: f64 = 5.0;
        let closed_form_first = 1.0 / (1.0 + 2.0 * (-big).exp());
        assert!((closed_form_first - 0.986_703_291_042_268).abs() < 1e-15);
        let state = FilterState::new(FilterConfig {
            n_states: 3,
            ..FilterConfig::default()
        })
        .unwrap();
        let d = DistanceVector::new(vec![0.0, big, big]).unwrap();
        let (_, diag) = step(state, &d).unwrap();
        assert!((diag.posterior.weights()[0] - 0.986_703_291_042_268).abs() < 1e-12);
        assert!(diag.posterior.weights()[0] > 0.9);
    }

    #[test]
    fn step_rejects_shape_mismatch() {
        let state = FilterState::new(FilterConfig {
            n_states: 3,
            ..FilterConfig::default()
        })
        .unwrap();
        let d = DistanceVector::new(vec![1.0; 4]).unwrap();
        assert!(step(state, &d).is_err());
    }
}
