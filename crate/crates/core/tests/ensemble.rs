use granular::ensemble::{InitialDistribution, VelocityEnsemble};
use granular::profile::l1_distance;
use granular::rescaled::drift_step;
use proptest::prelude::*;

fn ensemble() -> impl Strategy<Value = VelocityEnsemble<f64>> {
    (2usize..=4, 2usize..60).prop_flat_map(|(d, n)| {
        prop::collection::vec(-5.0f64..5.0, d * n).prop_map(move |data| VelocityEnsemble::from_flat(d, data).unwrap())
    })
}

fn rel_le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12) + 1e-300
}

proptest! {
    #[test]
    fn holder_and_convexity_chains(ens in ensemble()) {
        let m_half = ens.moment(0.5);
        let m1 = ens.moment(1.0);
        let m32 = ens.moment(1.5);
        let m2 = ens.moment(2.0);
        prop_assert!(rel_le(m1.powf(1.5), m32));
        prop_assert!(rel_le(m32.powf(4.0 / 3.0), m2));
        prop_assert!(rel_le(m_half * m_half, m1));
    }

    #[test]
    fn moments_are_homogeneous(ens in ensemble(), lambda in 0.1f64..10.0, l in 0.0f64..3.0) {
        let mut scaled = ens.clone();
        scaled.scale(lambda);
        let want = ens.moment(l) * lambda.powf(2.0 * l);
        prop_assert!((scaled.moment(l) - want).abs() <= 1e-12 * want.abs() + 1e-300);
    }

    #[test]
    fn drift_scales_energy_exactly(ens in ensemble(), tau in 0.0f64..1.0, ds in 1e-3f64..2.0) {
        let out = drift_step(&ens, tau, ds).unwrap();
        let want = ens.energy() * (2.0 * tau * ds).exp();
        prop_assert!((out.energy() - want).abs() <= 4.0 * f64::EPSILON * want);
        let p0: f64 = ens.mean_velocity().iter().map(|x| x * x).sum::<f64>().sqrt();
        let p1: f64 = out.mean_velocity().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(p1 <= p0 * (tau * ds).exp() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn normalization_reaches_class_g(ens in ensemble()) {
        let mut e = ens.clone();
        prop_assume!(e.normalize_to_g().is_ok());
        let p: f64 = e.mean_velocity().iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(p <= 1e-12);
        prop_assert!((e.energy() - 1.0).abs() <= 1e-12);
        let again = { let mut x = e.clone(); x.normalize_to_g().unwrap(); x };
        prop_assert_eq!(again, e);
    }
}

#[test]
fn maxwellian_fourth_moment() {
    for d in [2, 3, 5] {
        let ens = VelocityEnsemble::<f64>::init(100_000, d, InitialDistribution::Maxwellian, 21).unwrap();
        let want = 1.0 + 2.0 / d as f64;
        assert!((ens.moment(2.0) - want).abs() <= 0.02 * want, "d = {d}: {}", ens.moment(2.0));
    }
}

#[test]
fn maxwellian_histogram_matches_speed_density() {
    let ens = VelocityEnsemble::<f64>::init(100_000, 3, InitialDistribution::Maxwellian, 4).unwrap();
    let h = ens.radial_histogram(64, 5.0).unwrap();
    let exact = h.maxwellian_like(3, 1.0);
    assert!(l1_distance(&h, &exact).unwrap() < 0.05);
}

#[test]
fn histogram_examples() {
    let rows: Vec<Vec<f64>> = (0..10).map(|k| {
        let a = k as f64;
        vec![0.7 * a.cos(), 0.7 * a.sin()]
    }).collect();
    let ens = VelocityEnsemble::from_rows(&rows).unwrap();
    let h = ens.radial_histogram(8, 1.0).unwrap();
    assert_eq!(h.masses().iter().filter(|&&m| m > 0.0).count(), 1);
    assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(h.overflow(), 0.0);
    assert!((h.total_mass() - 1.0).abs() <= 1e-12);
}

#[test]
fn initialization_is_deterministic() {
    for dist in [
        InitialDistribution::Maxwellian,
        InitialDistribution::UniformBall,
        InitialDistribution::TwoTemperature { ratio: 3.0 },
    ] {
        let a = VelocityEnsemble::<f64>::init(500, 3, dist, 9).unwrap();
        let b = VelocityEnsemble::<f64>::init(500, 3, dist, 9).unwrap();
        let c = VelocityEnsemble::<f64>::init(500, 3, dist, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
    assert!(VelocityEnsemble::<f64>::init(1, 3, InitialDistribution::Maxwellian, 1).is_err());
}

#[test]
fn single_precision_ensembles_work() {
    let ens = VelocityEnsemble::<f32>::init(10_000, 3, InitialDistribution::Maxwellian, 1).unwrap();
    assert!((ens.energy() - 1.0).abs() < 1e-5);
    assert!(ens.moment(1.5) >= ens.energy().powf(1.5) * (1.0 - 1e-5));
}
