use balance_core::analysis::{peak_series, stcc, LagRange, PeakRule};
use balance_core::sdde::{simulate, SimRequest};
use balance_core::stability::{deterministic_exponent, largest_lyapunov, LyapunovConfig};
use balance_core::trial::{load, persist, replay, ReplayChannel, SessionConfig, TerminationCause, TrialMode, TrialRecord};
use balance_core::{ModelKind, ModelParams, TimeSeries};
use proptest::prelude::*;

#[test]
fn same_seed_same_run() {
    let req = SimRequest::new(ModelKind::Coupled, ModelParams { seed: 3, ..Default::default() }, 20.0)
        .channels(&["q_T", "q_M1", "q_M2"])
        .downsample(10);
    let a = simulate(&req).unwrap();
    let b = simulate(&req).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.series[0].samples.len(), 2000);
}

#[test]
fn noiseless_estimate_tracks_the_root() {
    let p = ModelParams { beta: 19.0, nu: 0.0, ..Default::default() };
    let cfg = LyapunovConfig { horizon: 4000.0, step_halving: true, ..Default::default() };
    let est = largest_lyapunov(ModelKind::Single, &p, &cfg).unwrap();
    let root = deterministic_exponent(ModelKind::Single, &p).unwrap();
    assert!((est.lambda1 - root).abs() <= 2.0 * est.uncertainty(), "{} vs {root}", est.lambda1);
}

#[test]
fn simulated_trial_survives_a_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(
        &SimRequest::new(ModelKind::Single, ModelParams { seed: 9, ..Default::default() }, 30.0)
            .channels(&["x_T", "x_M"])
            .downsample(20),
    )
    .unwrap();
    let mut cfg = SessionConfig::new(TrialMode::Single);
    cfg.max_duration = 30.0;
    let rec = TrialRecord::from_series("s", vec!["a".into()], cfg, &out.series[0], &out.series[1..], TerminationCause::Completed)
        .unwrap();
    let path = dir.path().join("s.trial.jsonl");
    persist(&rec, &path).unwrap();
    let loaded = load(&path).unwrap();
    assert!(loaded.warnings.is_empty());
    assert_eq!(loaded.record, rec);

    let vel = replay(&loaded.record, &[ReplayChannel::TipVel, ReplayChannel::BaseVel(1)]).unwrap();
    let (tip, base) = (&vel[0], &vel[1]);
    assert_eq!(tip.samples, out.series[0].derivative("v").samples);
    let peaks = peak_series(tip, base, 5.0, 1.0, &PeakRule::default()).unwrap();
    assert!(!peaks.peaks.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stcc_ignores_gain_and_offset(
        xs in prop::collection::vec(-5.0f64..5.0, 200),
        ys in prop::collection::vec(-5.0f64..5.0, 200),
        gain in 0.01f64..100.0,
        offset in -10.0f64..10.0,
    ) {
        let x = TimeSeries::new("x", 0.01, xs);
        let y = TimeSeries::new("y", 0.01, ys.clone());
        let scaled = TimeSeries::new("y", 0.01, ys.iter().map(|v| gain * v + offset).collect());
        let a = stcc(&x, &y, 1.0, 0.5, LagRange::symmetric(0.2)).unwrap();
        let b = stcc(&x, &scaled, 1.0, 0.5, LagRange::symmetric(0.2)).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }
}
