//! Drift-collision solver in self-similar variables.
//!
//! The transport term `τ ∇·(w g)` is integrated exactly along its
//! characteristics `dw/ds = τ w`, which scales every velocity by `exp(τ ds)`.
//! Collision substeps use the plain collision operator (no energy-dependent
//! rate). The two parts alternate with first-order Lie splitting.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsmc::{DsmcParams, DsmcState, RateLaw};
use crate::ensemble::{InitialDistribution, MomentSeries, VelocityEnsemble};
use crate::error::{input, Error, Result};
use crate::kernel::{dissipation_rate, KernelConfig};
use crate::num::{fit_line, from_usize, lit, to_f64, Real};
use crate::profile::ProfileHistogram;

/// Records used by the moving average of [`stationarity_residual`].
pub const RESIDUAL_SMOOTHING: usize = 10;

/// Exact solution of the anti-drift transport over `ds`: `w -> exp(τ ds) w`.
pub fn drift_step<T: Real>(ens: &VelocityEnsemble<T>, tau: T, ds: T) -> Result<VelocityEnsemble<T>> {
    if !(ds > T::zero()) {
        return input(format!("drift step must be positive, got {ds}"));
    }
    if !(tau >= T::zero()) {
        return input(format!("drift strength must be non-negative, got {tau}"));
    }
    let mut out = ens.clone();
    if tau > T::zero() {
        out.scale((tau * ds).exp());
    }
    Ok(out)
}

/// Controls of a rescaled run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledParams {
    pub dsmc: DsmcParams,
    pub s_max: f64,
    /// Trailing span over which the profile and energy band are measured.
    pub avg_window: f64,
    /// Number of equally spaced moment and histogram records over the run.
    pub records: usize,
    pub bins: usize,
    /// Histogram range; `None` picks a range from the energy-balance estimate.
    pub v_max: Option<f64>,
    /// Largest energy change of a single drift substep.
    pub max_drift_change: f64,
    pub energy_band: (f64, f64),
    pub init: InitialDistribution,
}

impl Default for RescaledParams {
    fn default() -> Self {
        Self {
            dsmc: DsmcParams::default(),
            s_max: 200.0,
            avg_window: 100.0,
            records: 400,
            bins: 64,
            v_max: None,
            max_drift_change: 0.01,
            energy_band: (1e-4, 1e4),
            init: InitialDistribution::Maxwellian,
        }
    }
}

impl RescaledParams {
    pub fn validate(&self) -> Result<()> {
        self.dsmc.validate()?;
        if !(self.avg_window > 0.0 && self.s_max > self.avg_window) {
            return input(format!(
                "need s_max > avg_window > 0, got s_max = {}, avg_window = {}",
                self.s_max, self.avg_window
            ));
        }
        if self.records < 2 * (RESIDUAL_SMOOTHING + 2) {
            return input(format!("need at least {} records, got {}", 2 * (RESIDUAL_SMOOTHING + 2), self.records));
        }
        if !(self.max_drift_change > 0.0 && self.max_drift_change < 1.0) {
            return input("max_drift_change must lie in (0, 1)");
        }
        let (lo, hi) = self.energy_band;
        if !(lo > 0.0 && hi > lo) {
            return input(format!("invalid energy band [{lo}, {hi}]"));
        }
        Ok(())
    }
}

/// Output of a rescaled run.
#[derive(Debug, Clone)]
pub struct RescaledRun<T> {
    pub series: MomentSeries<T>,
    /// Time-averaged speed histogram over the trailing window.
    pub profile: ProfileHistogram,
    /// Smallest and largest recorded energy in the trailing window.
    pub c0_hat: T,
    pub c1_hat: T,
    pub stationarity_residual: T,
    pub window: (T, T),
    /// Histogram at every record.
    pub history: Vec<(T, ProfileHistogram)>,
    pub n_particles: usize,
    pub ensemble: VelocityEnsemble<T>,
}

impl<T: Real> RescaledRun<T> {
    pub fn converged(&self) -> bool {
        self.c0_hat > T::zero() && self.c0_hat <= self.c1_hat && self.c1_hat.is_finite()
    }
}

/// Stationary energy predicted by balancing the drift input `2τE` against the
/// dissipation of a Maxwellian of the same energy, `D(1)⟨|u|³⟩`.
/// Returns `None` when there is no finite positive balance (`τ = 0` or `e = 1`).
pub fn stationary_energy_estimate<T: Real>(config: &KernelConfig<T>) -> Option<f64> {
    let tau = to_f64(config.tau);
    let d1 = to_f64(dissipation_rate(T::one(), config));
    if !(tau > 0.0 && d1 > 0.0) {
        return None;
    }
    let c = maxwellian_cubic_relative_speed(config.dim);
    Some((2.0 * tau / (d1 * c)).powi(2))
}

/// `⟨|v - v_*|³⟩ / E^{3/2}` for a centred Maxwellian in `dim` dimensions.
pub fn maxwellian_cubic_relative_speed(dim: usize) -> f64 {
    // Γ(x + 1/2)/Γ(x) by recurrence from x = 1/2 or x = 1
    let x = dim as f64 / 2.0;
    let (mut r, mut y) = if dim.is_multiple_of(2) {
        (std::f64::consts::PI.sqrt() / 2.0, 1.0)
    } else {
        (1.0 / std::f64::consts::PI.sqrt(), 0.5)
    };
    while y < x {
        r *= (y + 0.5) / y;
        y += 1.0;
    }
    (4.0 / dim as f64).powf(1.5) * (x + 0.5) * r
}

/// Histogram range used when none is given: five times the root-mean-square
/// speed at the larger of the initial and the balance energy.
pub fn default_v_max<T: Real>(config: &KernelConfig<T>) -> f64 {
    let e_ref = stationary_energy_estimate(config).unwrap_or(1.0).max(1.0);
    5.0 * e_ref.sqrt()
}

/// Solves the drift-collision equation from `n` particles drawn with `seed`.
pub fn run_rescaled<T: Real>(
    config: &KernelConfig<T>,
    n: usize,
    seed: u64,
    params: &RescaledParams,
) -> Result<RescaledRun<T>> {
    let ens = VelocityEnsemble::init(n, config.dim, params.init, seed)?;
    run_rescaled_from(config, ens, seed, params)
}

pub fn run_rescaled_from<T: Real>(
    config: &KernelConfig<T>,
    ens: VelocityEnsemble<T>,
    seed: u64,
    params: &RescaledParams,
) -> Result<RescaledRun<T>> {
    params.validate()?;
    let tau = config.tau;
    let n_particles = ens.len();
    let v_max = params.v_max.unwrap_or_else(|| default_v_max(config));
    let mut state = DsmcState::new(config.clone(), ens, params.dsmc, RateLaw::Plain, seed)?;
    let c_target = lit::<T>(params.dsmc.c_target);
    let s_max = lit::<T>(params.s_max);
    let record_ds = s_max / from_usize::<T>(params.records);
    let (band_lo, band_hi) = (lit::<T>(params.energy_band.0), lit::<T>(params.energy_band.1));
    let drift_cap = if tau > T::zero() {
        lit::<T>(params.max_drift_change) / (lit::<T>(2.0) * tau)
    } else {
        T::infinity()
    };

    let mut history = Vec::new();
    state.record(T::zero())?;
    history.push((T::zero(), state.ensemble().radial_histogram(params.bins, lit(v_max))?));
    let mut k = 1usize;
    let mut next_record = record_ds;

    while state.time() < s_max {
        let s = state.time();
        let target = next_record.min(s_max);
        let ds = state.choose_dt(c_target).min(drift_cap).min(target - s);
        let grow = (tau * ds).exp();
        state.scale_velocities(grow);
        let rep = state.step(ds)?;
        if rep.dt < ds {
            state.scale_velocities((tau * (rep.dt - ds)).exp());
        }
        let e = state.energy();
        if !(e >= band_lo && e <= band_hi) {
            return Err(Error::Divergence {
                s: to_f64(state.time()),
                energy: to_f64(e),
                lo: params.energy_band.0,
                hi: params.energy_band.1,
            });
        }
        // within one part in 10^9 of the record time counts as reaching it
        if state.time() >= target * (T::one() - lit(1e-9)) {
            state.record(rep.dt)?;
            history.push((state.time(), state.ensemble().radial_histogram(params.bins, lit(v_max))?));
            k += 1;
            next_record = record_ds * lit::<T>(k as f64);
        }
    }

    let (ens, series) = state.into_parts();
    let lo = s_max - lit(params.avg_window);
    let window = (lo, s_max);
    let in_window: Vec<_> = series.records().iter().filter(|r| r.t >= lo).collect();
    let c0_hat = in_window.iter().map(|r| r.energy).fold(T::infinity(), T::min);
    let c1_hat = in_window.iter().map(|r| r.energy).fold(T::neg_infinity(), T::max);
    let profile = ProfileHistogram::average(history.iter().filter(|(s, _)| *s >= lo).map(|(_, h)| h))?;
    let residual = stationarity_residual(&series, window)?;
    Ok(RescaledRun {
        series,
        profile,
        c0_hat,
        c1_hat,
        stationarity_residual: residual,
        window,
        history,
        n_particles,
        ensemble: ens,
    })
}

/// Centred differences of the energy after a centred moving average over
/// `smoothing` records, as `(time, derivative)` pairs.
pub fn smoothed_derivative<T: Real>(series: &MomentSeries<T>, smoothing: usize) -> Vec<(T, T)> {
    let ts: Vec<f64> = series.records().iter().map(|r| to_f64(r.t)).collect();
    let es: Vec<f64> = series.records().iter().map(|r| to_f64(r.energy)).collect();
    let w = smoothing.max(1);
    if ts.len() < w + 2 {
        return Vec::new();
    }
    let avg = |v: &[f64], i: usize| v[i..i + w].iter().sum::<f64>() / w as f64;
    let smooth: Vec<(f64, f64)> = (0..=ts.len() - w).map(|i| (avg(&ts, i), avg(&es, i))).collect();
    smooth
        .windows(3)
        .map(|p| (lit(p[1].0), lit((p[2].1 - p[0].1) / (p[2].0 - p[0].0))))
        .collect()
}

/// Largest smoothed `|dE/ds|` over the time window.
pub fn stationarity_residual<T: Real>(series: &MomentSeries<T>, window: (T, T)) -> Result<T> {
    let (lo, hi) = window;
    let (Some(first), Some(last)) = (series.records().first(), series.last()) else {
        return input("empty series");
    };
    if !(lo < hi) {
        return input(format!("empty window [{lo}, {hi}]"));
    }
    let slack = (last.t - first.t) * lit(1e-9);
    if lo < first.t - slack || hi > last.t + slack {
        return input(format!("window [{lo}, {hi}] exceeds the series span [{}, {}]", first.t, last.t));
    }
    let d = smoothed_derivative(series, RESIDUAL_SMOOTHING);
    let vals: Vec<T> = d.iter().filter(|(t, _)| *t >= lo && *t <= hi).map(|(_, v)| v.abs()).collect();
    if vals.is_empty() {
        return input("window contains too few records for the smoothed derivative");
    }
    Ok(vals.into_iter().fold(T::zero(), T::max))
}

/// Residual level of noise alone: the linear trend of the window's energies
/// is removed and the mean residual over random permutations of what is
/// left is returned.
pub fn residual_noise_floor<T: Real, R: Rng + ?Sized>(
    series: &MomentSeries<T>,
    window: (T, T),
    resamples: usize,
    rng: &mut R,
) -> Result<T> {
    let (lo, hi) = window;
    let inside: Vec<_> = series.records().iter().filter(|r| r.t >= lo && r.t <= hi).collect();
    if inside.len() < RESIDUAL_SMOOTHING + 2 {
        return input("window contains too few records for a noise floor");
    }
    let ts: Vec<f64> = inside.iter().map(|r| to_f64(r.t)).collect();
    let es: Vec<f64> = inside.iter().map(|r| to_f64(r.energy)).collect();
    let Some(trend) = fit_line(&ts, &es) else {
        return input("degenerate window for a noise floor");
    };
    let level = es.iter().sum::<f64>() / es.len() as f64;
    let mut noise: Vec<f64> = ts.iter().zip(&es).map(|(t, e)| e - trend.intercept - trend.slope * t).collect();
    let mut total = 0.0;
    for _ in 0..resamples.max(1) {
        noise.shuffle(rng);
        let pts = ts.iter().zip(&noise).map(|(&t, &r)| (lit::<T>(t), lit::<T>(level + r)));
        let shuffled = MomentSeries::from_energy(series.dim(), pts)?;
        let d = smoothed_derivative(&shuffled, RESIDUAL_SMOOTHING);
        total += d.iter().map(|(_, v)| to_f64(v.abs())).fold(0.0, f64::max);
    }
    Ok(lit(total / resamples.max(1) as f64))
}
