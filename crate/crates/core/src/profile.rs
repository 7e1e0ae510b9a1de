//! Radial (speed) histograms estimating a velocity profile, and the discrete
//! L¹ distance between them.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{input, Result};
use crate::num::{integrate, unit_sphere_area};

/// Mass-normalized speed histogram with an overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileHistogram {
    bin_edges: Vec<f64>,
    masses: Vec<f64>,
    overflow: f64,
    n_samples: u64,
}

impl ProfileHistogram {
    /// Empty histogram with `bins` equal-width bins on `[0, v_max)`.
    pub fn uniform(bins: usize, v_max: f64) -> Result<Self> {
        if bins < 8 {
            return input(format!("at least 8 bins are required, got {bins}"));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return input(format!("v_max must be positive and finite, got {v_max}"));
        }
        let edges = (0..=bins).map(|k| v_max * k as f64 / bins as f64).collect();
        Ok(Self { bin_edges: edges, masses: vec![0.0; bins], overflow: 0.0, n_samples: 0 })
    }

    /// Histogram from explicit edges and masses; masses plus overflow must sum to 1.
    pub fn from_parts(bin_edges: Vec<f64>, masses: Vec<f64>, overflow: f64, n_samples: u64) -> Result<Self> {
        if bin_edges.len() != masses.len() + 1 || masses.is_empty() {
            return input("a histogram needs one more edge than bins");
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return input("bin edges must increase strictly");
        }
        if masses.iter().chain(std::iter::once(&overflow)).any(|m| !(*m >= 0.0)) {
            return input("bin masses must be non-negative");
        }
        let total: f64 = masses.iter().sum::<f64>() + overflow;
        if (total - 1.0).abs() > 1e-12 {
            return input(format!("histogram mass must be 1, got {total}"));
        }
        Ok(Self { bin_edges, masses, overflow, n_samples })
    }

    /// Replaces the contents with the normalized histogram of `speeds`.
    pub fn accumulate_speeds<I: IntoIterator<Item = f64>>(&mut self, speeds: I) {
        let bins = self.masses.len();
        let v_max = *self.bin_edges.last().unwrap();
        let mut counts = vec![0u64; bins + 1];
        for s in speeds {
            let k = if s >= v_max { bins } else { ((s / v_max * bins as f64) as usize).min(bins - 1) };
            counts[k] += 1;
        }
        self.set_counts(&counts);
    }

    fn set_counts(&mut self, counts: &[u64]) {
        let n: u64 = counts.iter().sum();
        let bins = self.masses.len();
        let nf = n.max(1) as f64;
        for (m, c) in self.masses.iter_mut().zip(counts) {
            *m = *c as f64 / nf;
        }
        self.overflow = counts[bins] as f64 / nf;
        self.n_samples = n;
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn bins(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum::<f64>() + self.overflow
    }

    /// Mean speed implied by bin midpoints (overflow counted at the last edge).
    pub fn mean_speed(&self) -> f64 {
        let inner: f64 = self.bin_edges.windows(2).zip(&self.masses).map(|(w, m)| 0.5 * (w[0] + w[1]) * m).sum();
        inner + self.overflow * self.bin_edges.last().unwrap()
    }

    /// Analytic speed distribution of a centred Maxwellian of energy `energy`
    /// (per-component variance `energy/dim`), integrated over the same bins.
    pub fn maxwellian_like(&self, dim: usize, energy: f64) -> Self {
        let sigma2 = energy / dim as f64;
        let norm = unit_sphere_area(dim) / (2.0 * std::f64::consts::PI * sigma2).powf(dim as f64 / 2.0);
        let density = |s: f64| norm * s.powi(dim as i32 - 1) * (-s * s / (2.0 * sigma2)).exp();
        let masses: Vec<f64> = self.bin_edges.windows(2).map(|w| integrate(density, w[0], w[1], 4, 16)).collect();
        let inside: f64 = masses.iter().sum();
        Self {
            bin_edges: self.bin_edges.clone(),
            masses,
            overflow: (1.0 - inside).max(0.0),
            n_samples: 0,
        }
    }

    /// Average of histograms on identical bins.
    pub fn average<'a, I: IntoIterator<Item = &'a ProfileHistogram>>(hists: I) -> Result<Self> {
        let mut iter = hists.into_iter();
        let Some(first) = iter.next() else {
            return input("cannot average an empty set of histograms");
        };
        let mut acc = first.clone();
        let mut count = 1usize;
        for h in iter {
            check_same_bins(&acc, h)?;
            acc.masses.iter_mut().zip(&h.masses).for_each(|(a, b)| *a += b);
            acc.overflow += h.overflow;
            acc.n_samples += h.n_samples;
            count += 1;
        }
        let c = count as f64;
        acc.masses.iter_mut().for_each(|m| *m /= c);
        acc.overflow /= c;
        Ok(acc)
    }

    /// Multinomial resample of `n` draws from this histogram's masses.
    pub fn resample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Self {
        let mut counts = vec![0u64; self.masses.len() + 1];
        let mut remaining = n;
        let mut mass_left = 1.0f64;
        let all = self.masses.iter().chain(std::iter::once(&self.overflow));
        for (k, &p) in all.enumerate() {
            if remaining == 0 {
                break;
            }
            let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
            let c = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(remaining);
            counts[k] = c;
            remaining -= c;
            mass_left -= p;
        }
        if remaining > 0 {
            counts[self.masses.len()] += remaining;
        }
        let mut out = self.clone();
        out.set_counts(&counts);
        out
    }

    /// Mean L¹ distance between this histogram and multinomial resamples of
    /// `n` draws from it: the sampling noise level of an `n`-particle histogram.
    pub fn bootstrap_noise_floor<R: Rng + ?Sized>(&self, n: u64, resamples: usize, rng: &mut R) -> f64 {
        let total: f64 = (0..resamples)
            .map(|_| {
                let r = self.resample(n, rng);
                l1_distance(self, &r).unwrap_or(0.0)
            })
            .sum();
        total / resamples.max(1) as f64
    }
}

fn check_same_bins(a: &ProfileHistogram, b: &ProfileHistogram) -> Result<()> {
    if a.bin_edges != b.bin_edges {
        return input("histograms have different bin edges");
    }
    Ok(())
}

/// `Σ |m1 - m2| + |overflow1 - overflow2|`, in `[0, 2]`.
pub fn l1_distance(h1: &ProfileHistogram, h2: &ProfileHistogram) -> Result<f64> {
    check_same_bins(h1, h2)?;
    let inner: f64 = h1.masses.iter().zip(&h2.masses).map(|(a, b)| (a - b).abs()).sum();
    Ok(inner + (h1.overflow - h2.overflow).abs())
}
