//! Synthetic lead/lag pairs.
//!
//! The leading series is an AR(1) process. The lagging series copies it at a
//! lag that is constant, switches between fixed regimes, or follows a
//! bounded trinomial random walk, optionally averaging the seven values
//! around the lag, plus Gaussian noise.
//!
//! Randomness comes from ChaCha20 seeded with `seed_from_u64`, split into
//! independent streams: 0 for AR innovations, 1 for the lag path and 2 for
//! observation noise. Normal variates use the `rand_distr` ziggurat sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdmError};

/// Identifies the generator so results can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str =
    "ChaCha20 (rand_chacha 0.9, seed_from_u64; streams 0=ar,1=lag,2=noise); normals: rand_distr 0.5 StandardNormal ziggurat";

/// Leading points generated and discarded before emission.
pub const WARMUP: usize = 50;

pub const DEFAULT_AR: f64 = 0.9;

pub const RW_MIN_LAG: usize = 5;
pub const RW_MAX_LAG: usize = 25;
pub const RW_START_LAG: usize = 15;

const STREAM_AR: u64 = 0;
const STREAM_LAG: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Step lag path, single lag.
    F1,
    /// Step lag path, seven-point average around the lag.
    F2,
    /// Random-walk lag path, single lag.
    F3,
    /// Random-walk lag path, seven-point average.
    F4,
    /// Constant lag 5.
    F5,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::F1, Family::F2, Family::F3, Family::F4, Family::F5];

    fn averaged(self) -> bool {
        matches!(self, Family::F2 | Family::F4)
    }
}

impl std::str::FromStr for Family {
    type Err = SdmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(Family::F1),
            "f2" => Ok(Family::F2),
            "f3" => Ok(Family::F3),
            "f4" => Ok(Family::F4),
            "f5" => Ok(Family::F5),
            other => Err(SdmError::InvalidConfiguration(format!(
                "unknown family `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Family::F1 => "f1",
            Family::F2 => "f2",
            Family::F3 => "f3",
            Family::F4 => "f4",
            Family::F5 => "f5",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: Family,
    pub length: usize,
    pub sigma_u: f64,
    pub ar_coefficient: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(family: Family, length: usize, sigma_u: f64, seed: u64) -> Self {
        Self {
            family,
            length,
            sigma_u,
            ar_coefficient: DEFAULT_AR,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_ar(self.ar_coefficient)?;
        if !(self.sigma_u >= 0.0) || !self.sigma_u.is_finite() {
            return Err(SdmError::InvalidParameter {
                name: "sigma_u",
                value: self.sigma_u,
            });
        }
        if self.length == 0 {
            return Err(SdmError::InvalidConfiguration(
                "length must be positive".into(),
            ));
        }
        if matches!(self.family, Family::F1 | Family::F2) && self.length > STEP_HORIZON {
            return Err(SdmError::InvalidConfiguration(format!(
                "step lag path is defined for t <= {STEP_HORIZON}, got length {}",
                self.length
            )));
        }
        Ok(())
    }
}

/// Lag per emitted time step (index 0 is t = 1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagPath {
    pub taus: Vec<usize>,
}

impl LagPath {
    pub fn constant(lag: usize, length: usize) -> Self {
        Self {
            taus: vec![lag; length],
        }
    }

    pub fn step(length: usize) -> Result<Self> {
        let taus = (1..=length).map(tau_step).collect::<Result<_>>()?;
        Ok(Self { taus })
    }

    pub fn random_walk<R: Rng + ?Sized>(length: usize, rng: &mut R) -> Self {
        let mut taus = Vec::with_capacity(length);
        let mut tau = RW_START_LAG;
        for i in 0..length {
            if i > 0 {
                tau = tau_random_walk_step(tau, rng).expect("walk stays within bounds");
            }
            taus.push(tau);
        }
        Self { taus }
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lag_path: LagPath,
    pub config: SimConfig,
}

fn check_ar(a: f64) -> Result<()> {
    if !(a.abs() < 1.0) {
        return Err(SdmError::InvalidConfiguration(format!(
            "AR coefficient must satisfy |a| < 1, got {a}"
        )));
    }
    Ok(())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// AR(1) recursion from an explicit first value and innovations.
pub fn ar1_from_innovations(first: f64, a: f64, innovations: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(innovations.len() + 1);
    out.push(first);
    let mut prev = first;
    for eta in innovations {
        prev = a * prev + eta;
        out.push(prev);
    }
    out
}

/// `x_1 ~ N(0,1)`, `x_t = a x_{t-1} + N(0,1)`.
pub fn gen_ar1(length: usize, a: f64, seed: u64) -> Result<Vec<f64>> {
    check_ar(a)?;
    if length == 0 {
        return Err(SdmError::InvalidConfiguration(
            "length must be positive".into(),
        ));
    }
    let mut rng = stream_rng(seed, STREAM_AR);
    let draws: Vec<f64> = (0..length)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Ok(ar1_from_innovations(draws[0], a, &draws[1..]))
}

/// Last time step covered by the step lag path.
pub const STEP_HORIZON: usize = 600;

/// Regime lag: 5 on `[1, 200]`, 20 on `[201, 400]`, 10 on `[401, 600]`.
pub fn tau_step(t: usize) -> Result<usize> {
    match t {
        1..=200 => Ok(5),
        201..=400 => Ok(20),
        401..=STEP_HORIZON => Ok(10),
        _ => Err(SdmError::OutOfRange(format!(
            "time step {t} (step lag path covers 1..=600)"
        ))),
    }
}

/// One move of the bounded trinomial lag walk.
pub fn tau_random_walk_step<R: Rng + ?Sized>(prev: usize, rng: &mut R) -> Result<usize> {
    if !(RW_MIN_LAG..=RW_MAX_LAG).contains(&prev) {
        return Err(SdmError::OutOfRange(format!(
            "random-walk lag {prev} (must lie in {RW_MIN_LAG}..={RW_MAX_LAG})"
        )));
    }
    let next = if prev >= RW_MAX_LAG {
        prev - rng.random_range(0..=1usize)
    } else if prev <= RW_MIN_LAG {
        prev + rng.random_range(0..=1usize)
    } else {
        match rng.random_range(0..3u8) {
            0 => prev - 1,
            1 => prev,
            _ => prev + 1,
        }
    };
    Ok(next)
}

/// Maps emitted position `k` of a path aligned with the tail of `x` to the
/// index of `x_t` in `x`.
fn emitted_index(x_len: usize, path_len: usize, k: usize) -> Result<usize> {
    if path_len > x_len {
        return Err(SdmError::InvalidConfiguration(format!(
            "lag path ({path_len}) longer than x ({x_len})"
        )));
    }
    Ok(x_len - path_len + k)
}

fn noise_draws<R: Rng + ?Sized>(n: usize, sigma_u: f64, rng: &mut R) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, sigma_u).map_err(|_| SdmError::InvalidParameter {
        name: "sigma_u",
        value: sigma_u,
    })?;
    Ok((0..n).map(|_| normal.sample(rng)).collect())
}

/// `y_t = x_{t - tau_t} + u_t`. The path is aligned with the tail of `x`, so
/// `x` may carry leading history that is not emitted.
pub fn apply_lag_single<R: Rng + ?Sized>(
    x: &[f64],
    lag_path: &LagPath,
    sigma_u: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    apply_lag(x, lag_path, sigma_u, rng, 0)
}

/// `y_t = (1/7) sum_{i=-3}^{3} x_{t - tau_t + i} + u_t`.
pub fn apply_lag_averaged<R: Rng + ?Sized>(
    x: &[f64],
    lag_path: &LagPath,
    sigma_u: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    apply_lag(x, lag_path, sigma_u, rng, 3)
}

fn apply_lag<R: Rng + ?Sized>(
    x: &[f64],
    lag_path: &LagPath,
    sigma_u: f64,
    rng: &mut R,
    half_width: usize,
) -> Result<Vec<f64>> {
    let n = lag_path.len();
    let mut y = Vec::with_capacity(n);
    for (k, &tau) in lag_path.taus.iter().enumerate() {
        let now = emitted_index(x.len(), n, k)?;
        if tau < half_width.max(1) || now < tau + half_width {
            return Err(SdmError::InvalidConfiguration(format!(
                "insufficient x history at t = {} (lag {tau})",
                k + 1
            )));
        }
        let centre = now - tau;
        let window = &x[centre - half_width..=centre + half_width];
        y.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    for (v, u) in y.iter_mut().zip(noise_draws(n, sigma_u, rng)?) {
        *v += u;
    }
    Ok(y)
}

/// Generates a pair for the configured family.
pub fn make_pair(config: SimConfig) -> Result<SimulatedPair> {
    config.validate()?;
    let total = config.length + WARMUP;
    let x_full = gen_ar1(total, config.ar_coefficient, config.seed)?;

    let lag_path = match config.family {
        Family::F1 | Family::F2 => LagPath::step(config.length)?,
        Family::F3 | Family::F4 => {
            LagPath::random_walk(config.length, &mut stream_rng(config.seed, STREAM_LAG))
        }
        Family::F5 => LagPath::constant(5, config.length),
    };

    let mut noise = stream_rng(config.seed, STREAM_NOISE);
    let y = if config.family.averaged() {
        apply_lag_averaged(&x_full, &lag_path, config.sigma_u, &mut noise)?
    } else {
        apply_lag_single(&x_full, &lag_path, config.sigma_u, &mut noise)?
    };

    Ok(SimulatedPair {
        x: x_full[WARMUP..].to_vec(),
        y,
        lag_path,
        config,
    })
}
