mod common;

use granular::kernel::{collide, dissipation_rate, sample_omega, sample_omega_into, uniform_direction, AngularWeight, KernelConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn direction(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; dim];
    uniform_direction(&mut rng, &mut w);
    w
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (2usize..=5).prop_flat_map(|d| {
        (
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
            any::<u64>().prop_map(move |s| direction(d, s)),
            0.0f64..1.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn collision_identities_hold((v, vs, w, e) in pair()) {
        let c = common::check_identities(&v, &vs, &w, e);
        prop_assert!(c.shared_impulse);
        prop_assert!(c.momentum <= 1.0, "momentum {:?}", c);
        prop_assert!(c.booked_energy_ulps <= 4.0, "booked {:?}", c);
        prop_assert!(c.output_rounding <= 1.0 + 1e-12, "rounding {:?}", c);
        prop_assert!(c.impulse_rounding <= 1.0, "impulse {:?}", c);
    }

    #[test]
    fn dissipation_is_nonincreasing_in_e((v, vs, w, e1) in pair(), e2 in 0.0f64..1.0) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let a = collide(&v, &vs, &w, lo).unwrap().delta_energy;
        let b = collide(&v, &vs, &w, hi).unwrap().delta_energy;
        prop_assert!(a <= 0.0 && b <= 0.0);
        prop_assert!(a.abs() >= b.abs());
    }

    #[test]
    fn dissipation_rate_scales_quadratically(u in 0.0f64..50.0, e in 0.0f64..1.0) {
        let cfg = KernelConfig::new(3, e, 0.0).unwrap();
        let d1 = dissipation_rate(1.0, &cfg);
        prop_assert!((dissipation_rate(u, &cfg) - d1 * u * u).abs() <= 1e-12 * d1 * u * u + 1e-300);
    }
}

#[test]
fn isotropic_sampler_is_unbiased() {
    let b1 = AngularWeight::isotropic(3).unwrap();
    let u_hat = [0.0, 0.6, 0.8];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut out = [0.0; 3];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let iters = sample_omega_into(&u_hat, &b1, &mut rng, &mut out).unwrap();
        assert_eq!(iters, 1);
        let x: f64 = u_hat.iter().zip(&out).map(|(a, b)| a * b).sum();
        sum += x;
        sum2 += x * x;
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
}

fn chi_square_pvalue(counts: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn isotropic_sampler_passes_chi_square_in_3d() {
    // û·ω is uniform on [-1, 1] for the uniform sphere in d = 3
    let b1 = AngularWeight::isotropic(3).unwrap();
    let u_hat = [1.0, 0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bins = 20;
    let n = 100_000;
    let mut counts = vec![0.0; bins];
    for _ in 0..n {
        let w = sample_omega(&u_hat, &b1, &mut rng).unwrap();
        counts[(((w[0] + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let expected = vec![n as f64 / bins as f64; bins];
    assert!(chi_square_pvalue(&counts, &expected) > 0.01);
}

#[test]
fn anisotropic_sampler_passes_chi_square_in_2d() {
    // density of the angle θ to û is (1 + c cos θ)/(2π)
    let c = 0.5;
    let b1 = AngularWeight::linear(2, c).unwrap();
    let u_hat = [0.6f64, -0.8];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bins = 24;
    let n = 100_000;
    let mut counts = vec![0.0; bins];
    let tau = std::f64::consts::TAU;
    for _ in 0..n {
        let w = sample_omega(&u_hat, &b1, &mut rng).unwrap();
        let cos: f64 = u_hat[0] * w[0] + u_hat[1] * w[1];
        let sin: f64 = u_hat[0] * w[1] - u_hat[1] * w[0];
        let theta = sin.atan2(cos).rem_euclid(tau);
        counts[((theta / tau * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let expected: Vec<f64> = (0..bins)
        .map(|k| {
            let (a, b) = (tau * k as f64 / bins as f64, tau * (k + 1) as f64 / bins as f64);
            n as f64 * ((b - a) + c * (b.sin() - a.sin())) / tau
        })
        .collect();
    assert!(chi_square_pvalue(&counts, &expected) > 0.01);
}

#[test]
fn anisotropic_mean_matches_quadrature() {
    let b1 = AngularWeight::linear(2, 0.5).unwrap();
    // trapezoid quadrature of x b1(x) over the circle
    let m = 20_000;
    let h = std::f64::consts::TAU / m as f64;
    let want: f64 = (0..m).map(|k| (k as f64 * h).cos() * b1.eval((k as f64 * h).cos()) * h).sum();
    let u_hat = [1.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| sample_omega(&u_hat, &b1, &mut rng).unwrap()[0]).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - want).abs() < 3.0 * se, "mean {mean}, want {want}, se {se}");
}

#[test]
fn dissipation_rate_matches_monte_carlo() {
    let e = 0.5;
    let cfg = KernelConfig::new(3, e, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1_000_000;
    let u = [1.0, 0.0, 0.0];
    let mut w = [0.0f64; 3];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        uniform_direction(&mut rng, &mut w);
        let x: f64 = (1.0 - e * e) / 4.0 * (u[0] * w[0]).powi(2);
        sum += x;
        sum2 += x * x;
    }
    let mean = sum / n as f64;
    let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
    // b1 = 1/|S²| turns the sphere integral into a uniform average
    assert!((dissipation_rate(1.0, &cfg) - mean).abs() < 3.0 * se);
}

#[test]
fn elastic_config_requires_diagnostics_mode() {
    assert!(KernelConfig::<f64>::new(3, 1.0, 0.0).is_err());
    let cfg = KernelConfig::<f64>::elastic(3, 0.0).unwrap();
    assert!(cfg.elastic_diagnostics);
    assert_eq!(dissipation_rate(2.0, &cfg), 0.0);
}
