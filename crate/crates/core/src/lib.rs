//! Signal diffusion mapping.
//!
//! A grid-based recursive Bayes filter that tracks a probability
//! distribution over the lag linking a leading series `x` to a lagging
//! series `y`, and uses it to produce one-step-ahead forecasts of `y`.
//!
//! * [`belief`]: belief state, diffusion prediction, Bayes update, filter step.
//! * [`measurement`]: squared-distance models, exponential likelihoods, forecasts.
//! * [`simulation`]: synthetic lead/lag pairs with fixed, stepped and random-walk lags.
//! * [`metrics`]: RMSE / FE scoring and the Monte-Carlo benchmark.
//! * [`pipeline`]: runs a filter variant over a whole series pair.
//! * [`io`]: CSV ingestion, standardisation and output formatting.

// `!(v >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod error;
pub mod io;
pub mod measurement;
pub mod metrics;
pub mod pipeline;
pub mod simulation;

pub use belief::{
    estimate_theta, init_beliefs, observe_transition_error, predict, step, update, BeliefVector,
    DiffusionEstimator, FilterConfig, FilterState, PredictedWeights, RateEstimator,
    StepDiagnostics, SweepMode,
};
pub use error::{Result, SdmError};
pub use measurement::{BeliefMatrix, DistanceMatrix, DistanceVector, LagWindow};
pub use metrics::{run_benchmark, run_trial, BenchmarkReport, BenchmarkSpec};
pub use pipeline::{run_pair, StepRecord, Variant};
pub use simulation::{make_pair, Family, SimConfig, SimulatedPair};
