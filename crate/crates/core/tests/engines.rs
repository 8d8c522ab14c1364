use mzi::cascade::front_section;
use mzi::stochastic::{run_trials, simulate_cascade};
use mzi::{
    build_fig2, simulate_single_loop, stochastic_fourier, CascadeSpec, DelayRule, Horizon,
    PeriodicSignal, RampSpec, TrialConfig,
};

#[test]
fn same_seed_same_clicks() {
    for seed in [0u64, 1, 99, u64::MAX] {
        let cfg = TrialConfig::new(44, seed);
        let a = simulate_single_loop(15, 4, &cfg).unwrap();
        let b = simulate_single_loop(15, 4, &cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a, b);
    }
    let a = simulate_single_loop(15, 4, &TrialConfig::new(44, 1)).unwrap();
    let b = simulate_single_loop(15, 4, &TrialConfig::new(44, 2)).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn empirical_intensity_is_unbiased() {
    let runs = run_trials(15, 4, &TrialConfig::new(44, 3), 200).unwrap();
    let mean = runs.iter().map(|r| r.empirical_intensity).sum::<f64>() / runs.len() as f64;
    let se = runs[0].stderr / (runs.len() as f64).sqrt();
    assert!((mean - 2.0).abs() <= 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn stochastic_fourier_matches_quadrature() {
    let demo2 = PeriodicSignal::builtin("demo2").unwrap();
    let est = stochastic_fourier(&demo2, &RampSpec::cosine(1).unwrap(), 1_000_000, 17).unwrap();
    assert!(
        (est.estimate - 1.0).abs() <= 4.0 * est.stderr,
        "{} +/- {}",
        est.estimate,
        est.stderr
    );
    assert!((est.normalization - 3.0).abs() < 1e-9);

    let flat = PeriodicSignal::builtin("constant").unwrap();
    let est = stochastic_fourier(&flat, &RampSpec::cosine(1).unwrap(), 200_000, 2).unwrap();
    assert!(est.estimate.abs() <= 4.0 * est.stderr, "{}", est.estimate);
}

#[test]
fn stochastic_front_section_row_eight() {
    let k = 7 * 11 * 13;
    let spec = front_section(60, 7, 11, 13, Horizon::Fixed(k)).unwrap();
    let run = simulate_cascade(&spec, &TrialConfig::new(200, 8)).unwrap();
    let unit = k as f64 / 8.0;
    for (detector, units) in [("A", 1.0), ("B", 1.0), ("C+D", 2.0)] {
        let t = run.tallies.iter().find(|t| t.detector == detector).unwrap();
        assert!(
            (t.empirical_intensity - t.expected_intensity).abs() <= 4.0 * t.stderr,
            "{detector}: {} vs {}",
            t.empirical_intensity,
            t.expected_intensity
        );
        assert!((t.expected_intensity / unit - units).abs() <= 0.5);
    }
}

#[test]
fn stochastic_cascade_conserves_particles() {
    let spec = build_fig2(60, [2, 3, 4, 5, 6, 7, 8], DelayRule::DarkPort).unwrap();
    let run = simulate_cascade(&spec, &TrialConfig::new(25, 4)).unwrap();
    assert!(!run.records.is_empty());
    for r in &run.records {
        assert_eq!(r.total(), 25);
        assert_eq!(r.counts.len(), 8);
    }
}

#[test]
fn config_round_trip() {
    let text = r#"{
        "N": 60,
        "horizon": "lcm",
        "root": {
            "label": "n1", "n": 2,
            "bright": {"label": "n2", "n": 3, "bright": "A", "dark": "B"},
            "dark": {"label": "n3", "n": 5, "bright": "C", "dark": "D", "delay": 4}
        }
    }"#;
    let spec = CascadeSpec::from_json(text).unwrap();
    assert_eq!(spec.observation_offset("C").unwrap(), 4);
    assert_eq!(spec.horizon(), Horizon::PathLcm);
    let again = CascadeSpec::from_json(&spec.to_json()).unwrap();
    assert_eq!(spec, again);
    let detectors: Vec<&str> = spec.detectors().collect();
    assert_eq!(detectors, ["A", "B", "C", "D"]);
}
