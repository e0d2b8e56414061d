use proptest::prelude::*;

use sdm_core::measurement::{
    distances_bidirectional, distances_posneg, distances_uni, forecast_uni, weighted_residual,
};
use sdm_core::metrics::BenchmarkReport;
use sdm_core::{
    make_pair, run_benchmark, run_pair, step, BeliefVector, BenchmarkSpec, DistanceVector, Family,
    FilterConfig, FilterState, LagWindow, SimConfig, Variant,
};

fn window() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 2..25)
}

fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|w| w / s).collect()
    })
}

proptest! {
    #[test]
    fn zero_diffusion_is_a_fixed_point(prior in (2usize..20).prop_flat_map(distribution), d in 0.0f64..10.0, steps in 1usize..20) {
        let n = prior.len();
        let beliefs = BeliefVector::from_weights(prior.clone()).unwrap();
        let mut state = FilterState::with_beliefs(beliefs, FilterConfig { n_states: n, ..FilterConfig::default() });
        // Equal distances leave transition errors at rounding level, so theta stays ~0.
        let flat = DistanceVector::new(vec![d; n]).unwrap();
        for _ in 0..steps {
            let (next, diag) = step(state, &flat).unwrap();
            prop_assert!(diag.theta < 1e-15, "theta {}", diag.theta);
            state = next;
        }
        for (a, b) in state.beliefs.weights().iter().zip(&prior) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn posneg_columns_agree_when_target_is_zero(xs in window()) {
        let w = LagWindow::from_lagged(xs).unwrap();
        let d = distances_posneg(&w, 0.0).unwrap();
        prop_assert_eq!(d.column(0), d.column(1));
    }

    #[test]
    fn weighted_residual_matches_expanded_square(
        (xs, w) in (2usize..25).prop_flat_map(|n| (prop::collection::vec(-5.0f64..5.0, n), distribution(n))),
        y in -5.0f64..5.0,
    ) {
        let window = LagWindow::from_lagged(xs.clone()).unwrap();
        let beliefs = BeliefVector::from_weights(w.clone()).unwrap();
        let got = weighted_residual(&beliefs, &distances_uni(&window, y).unwrap()).unwrap();
        let mut oracle = 0.0;
        for (wi, xi) in w.iter().zip(&xs) {
            oracle += wi * y * y - 2.0 * wi * y * xi + wi * xi * xi;
        }
        prop_assert!((got - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()), "{got} vs {oracle}");
    }

    #[test]
    fn one_hot_forecast_is_a_lag_lookup(xs in window(), pick in any::<prop::sample::Index>()) {
        let n = xs.len();
        let lag = pick.index(n) + 1;
        let mut w = vec![0.0; n];
        w[lag - 1] = 1.0;
        let window = LagWindow::from_lagged(xs).unwrap();
        let f = forecast_uni(&BeliefVector::from_weights(w).unwrap(), &window).unwrap();
        prop_assert_eq!(f, window.at_lag(lag));
    }
}

#[test]
fn true_f2_weights_forecast_without_error() {
    let pair = make_pair(SimConfig::new(Family::F2, 600, 0.0, 12)).unwrap();
    let n = 30;
    for t in n..pair.x.len() {
        let tau = pair.lag_path.taus[t];
        let mut w = vec![0.0; n];
        for lag in tau - 3..=tau + 3 {
            w[lag - 1] = 1.0 / 7.0;
        }
        let window = LagWindow::from_history(&pair.x[..t], n).unwrap();
        let f = forecast_uni(&BeliefVector::from_weights(w).unwrap(), &window).unwrap();
        assert!(
            (f - pair.y[t]).abs() < 1e-12,
            "t = {}: {f} vs {}",
            t + 1,
            pair.y[t]
        );
    }
}

#[test]
fn noise_free_pairs_are_recomputable() {
    for family in Family::ALL {
        let pair = make_pair(SimConfig::new(family, 600, 0.0, 31)).unwrap();
        let half = if matches!(family, Family::F2 | Family::F4) {
            3
        } else {
            0
        };
        let mut checked = 0;
        for (t, &tau) in pair.lag_path.taus.iter().enumerate() {
            if t < tau + half {
                continue;
            }
            let mut sum = 0.0;
            for k in t - tau - half..=t - tau + half {
                sum += pair.x[k];
            }
            let want = sum / (2 * half + 1) as f64;
            assert_eq!(
                pair.y[t].to_bits(),
                want.to_bits(),
                "{family} t = {}",
                t + 1
            );
            checked += 1;
        }
        assert!(checked > 500, "{family}: only {checked} points checked");
    }
}

#[test]
fn concentration_on_a_nearly_noiseless_fixed_lag() {
    let pair = make_pair(SimConfig::new(Family::F5, 600, 0.01, 44)).unwrap();
    let recs = run_pair(&pair.x, &pair.y, Variant::Uni, &FilterConfig::default()).unwrap();
    for r in recs.iter().skip(50) {
        assert_eq!(r.argmax(30), (5, 0), "t = {}", r.t);
    }
}

#[test]
fn filter_trajectories_are_bit_identical() {
    let pair = make_pair(SimConfig::new(Family::F3, 400, 0.5, 8)).unwrap();
    let cfg = FilterConfig::default();
    let trajectory = || {
        let mut state = FilterState::new(cfg).unwrap();
        let mut states = Vec::new();
        for t in cfg.n_states..pair.x.len() {
            let w = LagWindow::from_history(&pair.x[..t], cfg.n_states).unwrap();
            state = step(state, &distances_uni(&w, pair.y[t]).unwrap())
                .unwrap()
                .0;
            states.push(state.clone());
        }
        states
    };
    assert_eq!(trajectory(), trajectory());
}

#[test]
fn identical_series_give_symmetric_columns() {
    let pair = make_pair(SimConfig::new(Family::F3, 300, 0.5, 5)).unwrap();
    let n = 20;
    let recs = run_pair(
        &pair.x,
        &pair.x,
        Variant::Bidirectional,
        &FilterConfig {
            n_states: n,
            ..FilterConfig::default()
        },
    )
    .unwrap();
    for r in &recs {
        for i in 0..n {
            assert!(
                (r.weights[i] - r.weights[n + i]).abs() < 1e-9,
                "t = {}",
                r.t
            );
        }
    }
    // Distances for identical slots are identical by construction.
    let w = LagWindow::from_history(&pair.x[..n], n).unwrap();
    let d = distances_bidirectional(&w, &w, pair.x[n], pair.x[n]).unwrap();
    assert_eq!(d.column(0), d.column(1));
}

#[test]
fn standard_error_shrinks_with_more_trials() {
    let se = |trials: usize, seed_base: u64| {
        let spec = BenchmarkSpec {
            families: vec![Family::F5],
            sigma_grid: vec![0.5],
            trials,
            seed_base,
            length: 300,
            ..BenchmarkSpec::default()
        };
        run_benchmark(&spec).unwrap().cells[0].std_error
    };
    let meta_runs = 8u64;
    let (mut small, mut large) = (0.0, 0.0);
    for m in 0..meta_runs {
        small += se(40, 10_000 * m);
        large += se(80, 10_000 * m + 5_000);
    }
    let ratio = large / small;
    let expected = 1.0 / 2f64.sqrt();
    assert!((ratio - expected).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn report_round_trips_through_json() {
    let spec = BenchmarkSpec {
        families: vec![Family::F1, Family::F5],
        sigma_grid: vec![0.25, 1.0],
        trials: 3,
        length: 250,
        ..BenchmarkSpec::default()
    };
    let report = run_benchmark(&spec).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: BenchmarkReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.metadata, report.metadata);
    assert_eq!(back.cells, report.cells);
    assert!(back.raw.is_empty());

    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["metadata"]["extra"] = serde_json::json!(1);
    assert!(serde_json::from_value::<BenchmarkReport>(value).is_err());
}
