use granular::analysis::{derivative_decay, geometric_points};
use granular::ensemble::MomentSeries;
use granular::kernel::KernelConfig;
use granular::profile::l1_distance;
use granular::rescaled::{
    residual_noise_floor, run_rescaled, stationarity_residual, stationary_energy_estimate, RescaledParams,
};
use granular::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn elastic_profile_is_maxwellian() {
    let cfg = KernelConfig::<f64>::elastic(3, 0.0).unwrap();
    let p = RescaledParams { s_max: 20.0, avg_window: 10.0, v_max: Some(5.0), ..Default::default() };
    let run = run_rescaled(&cfg, 20_000, 1, &p).unwrap();
    assert!((run.c0_hat - 1.0).abs() < 1e-10 && (run.c1_hat - 1.0).abs() < 1e-10);
    let exact = run.profile.maxwellian_like(3, 1.0);
    let d = l1_distance(&run.profile, &exact).unwrap();
    assert!(d <= 0.05, "L1 = {d}");
}

#[test]
fn strong_drift_diverges() {
    let cfg = KernelConfig::new(3, 0.5, 0.0).unwrap().with_tau(10.0).unwrap();
    assert!(stationary_energy_estimate(&cfg).unwrap() > 1e3);
    match run_rescaled(&cfg, 5_000, 2, &RescaledParams::default()) {
        Err(Error::Divergence { energy, .. }) => assert!(energy > 1e4),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn residual_of_decaying_exponential() {
    let s = MomentSeries::<f64>::from_energy(
        3,
        (0..=4000).map(|k| {
            let s = k as f64 * 0.0025;
            (s, 1.0 + 0.1 * (-s).exp())
        }),
    )
    .unwrap();
    let r = stationarity_residual(&s, (5.0, 10.0)).unwrap();
    assert!(r <= 0.1 * (-5.0f64).exp() * 1.1, "{r}");
    assert!(r >= 0.1 * (-5.0f64).exp() * 0.9);
    assert!(stationarity_residual(&s, (5.0, 11.0)).is_err());
}

#[test]
fn inelastic_run_settles_into_a_band() {
    let cfg = KernelConfig::<f64>::new(3, 0.95, 0.0).unwrap();
    let p = RescaledParams::default();
    let run = run_rescaled(&cfg, 20_000, 3, &p).unwrap();
    assert!(run.converged());
    assert!(run.c1_hat / run.c0_hat < 2.0, "{} {}", run.c0_hat, run.c1_hat);
    let estimate = stationary_energy_estimate(&cfg).unwrap();
    assert!((run.c0_hat / estimate - 1.0).abs() < 0.5, "{} vs {estimate}", run.c0_hat);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = residual_noise_floor(&run.series, run.window, 50, &mut rng).unwrap();
    assert!(run.stationarity_residual < 10.0 * noise, "{} vs {noise}", run.stationarity_residual);

    let points = geometric_points(0.95 * p.s_max, 4);
    let d = derivative_decay(&run.series, &points, noise).unwrap();
    assert!(d.decreasing, "{:?}", d.values);

    let total = run.profile.total_mass() + run.profile.overflow();
    assert!((total - 1.0).abs() <= 1e-12);
    assert_eq!(run.history.len(), p.records + 1);
}

#[test]
fn rescaled_runs_are_deterministic() {
    let cfg = KernelConfig::<f64>::new(3, 0.9, 0.0).unwrap();
    let p = RescaledParams { s_max: 20.0, avg_window: 10.0, records: 40, ..Default::default() };
    let a = run_rescaled(&cfg, 2_000, 5, &p).unwrap();
    let b = run_rescaled(&cfg, 2_000, 5, &p).unwrap();
    assert_eq!(a.series, b.series);
    assert_eq!(a.profile, b.profile);
}

#[test]
fn invalid_parameters_are_rejected() {
    let cfg = KernelConfig::<f64>::new(3, 0.9, 0.0).unwrap();
    let p = RescaledParams { s_max: 10.0, avg_window: 10.0, ..Default::default() };
    assert!(matches!(run_rescaled(&cfg, 100, 1, &p), Err(Error::Input(_))));
}
