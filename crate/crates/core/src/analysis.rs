//! Fits and verdicts over recorded series: cooling-law regressions on the
//! linearized energy, blow-up extrapolation, the third-moment bound,
//! derivative decay of rescaled runs and exponential convergence rates.

use serde::{Deserialize, Serialize};

use crate::ensemble::MomentSeries;
use crate::error::{input, Result};
use crate::num::{fit_line, to_f64, LineFit, Real};
use crate::rescaled::{smoothed_derivative, RESIDUAL_SMOOTHING};

/// Fits with `r²` below this are flagged unreliable.
pub const RELIABLE_R2: f64 = 0.9;
/// Number of time sub-windows used for the slope bracket.
pub const SUB_WINDOWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

impl Regime {
    pub fn from_exponent(a: f64) -> Self {
        if a < 0.5 {
            Regime::SubCritical
        } else if a == 0.5 {
            Regime::Critical
        } else {
            Regime::SuperCritical
        }
    }
}

/// `E^{a-1/2}`, or `log E` at `a = 1/2`; both are linear in `t` for the
/// cooling laws of the three regimes.
pub fn linearize_energy<T: Real>(series: &MomentSeries<T>, a: f64) -> Result<Vec<(f64, f64)>> {
    series
        .records()
        .iter()
        .map(|r| {
            let e = to_f64(r.energy);
            if !(e > 0.0) {
                return input(format!("non-positive energy {e} at t = {}", r.t));
            }
            let y = if a == 0.5 { e.ln() } else { e.powf(a - 0.5) };
            Ok((to_f64(r.t), y))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolingFit {
    pub a: f64,
    /// `1/(2a - 1)`; `None` at `a = 1/2`.
    pub alpha: Option<f64>,
    pub regime: Regime,
    pub slope: f64,
    pub intercept: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// Root of the fitted line (super-critical only).
    pub tc_hat: Option<f64>,
    /// Roots of the bracketing slopes through the window centroid.
    pub tc_range: Option<(f64, f64)>,
    /// Exponent of a free power-law fit of `E` against the distance to a
    /// fitted origin (sub- and super-critical only).
    pub exponent_hat: Option<f64>,
    pub fit_window: (f64, f64),
    pub r2: f64,
    pub n_points: usize,
    pub reliable: bool,
}

/// Least-squares line on the linearized energy after excluding the transient.
///
/// The transient is the first `transient_fraction` of the records or the
/// span before the sliding-window slope settles within 10% of the remaining
/// trend, whichever is later.
pub fn fit_cooling<T: Real>(series: &MomentSeries<T>, a: f64, transient_fraction: f64) -> Result<CoolingFit> {
    if !(0.0..1.0).contains(&transient_fraction) {
        return input(format!("transient fraction must lie in [0, 1), got {transient_fraction}"));
    }
    let pts = linearize_energy(series, a)?;
    if pts.len() < 2 * SUB_WINDOWS {
        return input(format!("need at least {} records, got {}", 2 * SUB_WINDOWS, pts.len()));
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let start = ((transient_fraction * ts.len() as f64) as usize).max(settling_index(&ts, &ys));
    let (ts, ys) = (&ts[start..], &ys[start..]);
    let fit = fit_line(ts, ys).ok_or_else(|| crate::Error::Input("degenerate fit window".into()))?;

    let (t_lo, t_hi) = (ts[0], ts[ts.len() - 1]);
    let mut slope_lo = fit.slope;
    let mut slope_hi = fit.slope;
    let width = (t_hi - t_lo) / SUB_WINDOWS as f64;
    for k in 0..SUB_WINDOWS {
        let (lo, hi) = (t_lo + k as f64 * width, t_lo + (k + 1) as f64 * width);
        let idx: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] >= lo && ts[i] <= hi).collect();
        if idx.len() < 3 {
            continue;
        }
        let sx: Vec<f64> = idx.iter().map(|&i| ts[i]).collect();
        let sy: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        if let Some(f) = fit_line(&sx, &sy) {
            slope_lo = slope_lo.min(f.slope);
            slope_hi = slope_hi.max(f.slope);
        }
    }

    let regime = Regime::from_exponent(a);
    let alpha = (a != 0.5).then(|| 1.0 / (2.0 * a - 1.0));
    let (tc_hat, tc_range) = if regime == Regime::SuperCritical && fit.slope < 0.0 {
        let tm = ts.iter().sum::<f64>() / ts.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let root = |s: f64| if s < 0.0 { tm - ym / s } else { f64::INFINITY };
        let (r1, r2) = (root(slope_lo), root(slope_hi));
        (Some(fit.root()), Some((r1.min(r2), r1.max(r2))))
    } else {
        (None, None)
    };
    let es: Vec<f64> = series.records()[start..].iter().map(|r| to_f64(r.energy)).collect();
    let exponent_hat = match regime {
        Regime::SubCritical => free_power_law(ts, &es, false).map(|(p, _)| p),
        Regime::SuperCritical => free_power_law(ts, &es, true).map(|(p, _)| p),
        Regime::Critical => None,
    };
    Ok(CoolingFit {
        a,
        alpha,
        regime,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_lo,
        slope_hi,
        tc_hat,
        tc_range,
        exponent_hat,
        fit_window: (t_lo, t_hi),
        r2: fit.r2,
        n_points: fit.n,
        reliable: fit.r2 >= RELIABLE_R2,
    })
}

/// First record index from which a local slope agrees with the trend of the
/// remaining records within 10%, capped at half the series.
fn settling_index(ts: &[f64], ys: &[f64]) -> usize {
    let chunk = (ts.len() / 20).max(3);
    let cap = ts.len() / 2;
    let mut k = 0;
    while k + chunk <= cap {
        let local = fit_line(&ts[k..k + chunk], &ys[k..k + chunk]);
        let trend = fit_line(&ts[k..], &ys[k..]);
        if let (Some(l), Some(g)) = (local, trend) {
            if (l.slope - g.slope).abs() <= 0.1 * g.slope.abs() {
                return k;
            }
        }
        k += chunk;
    }
    cap
}

/// Fits `log E = c + p log|t - t0|` with the origin `t0` free: below the data
/// for decay from a virtual origin, above it for a finite-time collapse.
/// Returns the exponent and the origin.
pub fn free_power_law(ts: &[f64], es: &[f64], collapse: bool) -> Option<(f64, f64)> {
    let (t_lo, t_hi) = (*ts.first()?, *ts.last()?);
    let span = t_hi - t_lo;
    if !(span > 0.0) || es.iter().any(|&e| !(e > 0.0)) {
        return None;
    }
    let log_e: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let origin = |delta: f64| if collapse { t_hi + delta } else { t_lo - delta };
    let fit_at = |delta: f64| -> Option<(LineFit, f64)> {
        let t0 = origin(delta);
        let xs: Vec<f64> = ts.iter().map(|&t| (t - t0).abs().ln()).collect();
        let f = fit_line(&xs, &log_e)?;
        let rss: f64 = xs.iter().zip(&log_e).map(|(x, y)| (y - f.intercept - f.slope * x).powi(2)).sum();
        Some((f, rss))
    };
    let rss = |delta: f64| fit_at(delta).map_or(f64::INFINITY, |(_, r)| r);

    let grid: Vec<f64> = (0..=240).map(|k| span * 10f64.powf(-6.0 + k as f64 / 30.0)).collect();
    let values: Vec<f64> = grid.iter().map(|&d| rss(d)).collect();
    let best = (0..grid.len()).min_by(|&i, &j| values[i].total_cmp(&values[j]))?;
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(grid.len() - 1)].ln());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if rss(x1.exp()) <= rss(x2.exp()) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let delta = (0.5 * (lo + hi)).exp();
    let (f, _) = fit_at(delta)?;
    Some((f.slope, origin(delta)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentBoundCheck {
    pub kappa_hat: f64,
    pub mu0_hat: f64,
    pub max_violation: f64,
}

/// Fits `E^{-1/2} = y0 (1 + μ0 (t - t0))` with the intercept pinned to the
/// first record, then `κ = max m_{3/2}(t) (1 + μ0 (t - t0))³`.
pub fn check_moment_bound<T: Real>(series: &MomentSeries<T>) -> Result<MomentBoundCheck> {
    let recs = series.records();
    if recs.len() < 2 {
        return input("need at least two records");
    }
    let t0 = to_f64(recs[0].t);
    let mut m32 = Vec::with_capacity(recs.len());
    for r in recs {
        let Some(m) = r.m_three_half else {
            return input(format!("record at t = {} has no m_three_half", r.t));
        };
        if !(r.energy > T::zero()) {
            return input(format!("non-positive energy at t = {}", r.t));
        }
        m32.push(to_f64(m));
    }
    let y0 = to_f64(recs[0].energy).powf(-0.5);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for r in recs {
        let x = to_f64(r.t) - t0;
        sxx += x * x;
        sxy += x * (to_f64(r.energy).powf(-0.5) / y0 - 1.0);
    }
    let mu0_hat = sxy / sxx;
    let growth = |r: &crate::ensemble::MomentRecord<T>| (1.0 + mu0_hat * (to_f64(r.t) - t0)).powi(3);
    let kappa_hat = recs.iter().zip(&m32).map(|(r, m)| m * growth(r)).fold(0.0, f64::max);
    let max_violation = recs
        .iter()
        .zip(&m32)
        .map(|(r, m)| m - kappa_hat / growth(r))
        .fold(0.0, f64::max);
    Ok(MomentBoundCheck { kappa_hat, mu0_hat, max_violation })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeDecay {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: f64,
    pub decreasing: bool,
}

/// `s_hi / 2^k` for `k = n-1, ..., 0`.
pub fn geometric_points(s_hi: f64, n: usize) -> Vec<f64> {
    (0..n).rev().map(|k| s_hi / 2f64.powi(k as i32)).collect()
}

/// Smoothed `|dE/ds|` at the given points; decreasing when each value is at
/// most the previous one plus `noise`.
pub fn derivative_decay<T: Real>(series: &MomentSeries<T>, points: &[f64], noise: f64) -> Result<DerivativeDecay> {
    if points.len() < 3 {
        return input(format!("need at least 3 evaluation points, got {}", points.len()));
    }
    let d = smoothed_derivative(series, RESIDUAL_SMOOTHING);
    let xs: Vec<f64> = d.iter().map(|(t, _)| to_f64(*t)).collect();
    let ys: Vec<f64> = d.iter().map(|(_, v)| to_f64(v.abs())).collect();
    let (Some(&lo), Some(&hi)) = (xs.first(), xs.last()) else {
        return input("series too short for the smoothed derivative");
    };
    let mut values = Vec::with_capacity(points.len());
    for &s in points {
        if s < lo || s > hi {
            return input(format!("point {s} lies outside the resolved range [{lo}, {hi}]"));
        }
        let k = xs.partition_point(|&x| x <= s).clamp(1, xs.len() - 1);
        let w = if xs[k] > xs[k - 1] { (s - xs[k - 1]) / (xs[k] - xs[k - 1]) } else { 1.0 };
        values.push(ys[k - 1] + w * (ys[k] - ys[k - 1]));
    }
    let decreasing = values.windows(2).all(|w| w[1] <= w[0] + noise);
    Ok(DerivativeDecay { s: points.to_vec(), values, noise, decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub rate_hat: f64,
    pub noise_floor: f64,
    /// `rate_hat / τ_e`.
    pub mu_e_check: f64,
    pub r2: f64,
    pub n_used: usize,
    pub fit_window: (f64, f64),
    pub reliable: bool,
}

/// Exponential fit of `(s, L¹)` from the largest distance up to the first
/// point at or below three times the noise floor.
pub fn fit_convergence(l1: &[(f64, f64)], noise_floor: f64, tau_e: f64) -> Result<ConvergenceFit> {
    if !(noise_floor >= 0.0) {
        return input(format!("noise floor must be non-negative, got {noise_floor}"));
    }
    if !(tau_e > 0.0) {
        return input(format!("τ_e must be positive, got {tau_e}"));
    }
    let threshold = 3.0 * noise_floor;
    let peak = (0..l1.len()).max_by(|&i, &j| l1[i].1.total_cmp(&l1[j].1));
    let used: Vec<(f64, f64)> = match peak {
        Some(p) => l1[p..].iter().copied().take_while(|&(_, d)| d > threshold && d > 0.0).collect(),
        None => Vec::new(),
    };
    let xs: Vec<f64> = used.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let fit = if used.len() >= 5 { fit_line(&xs, &ys) } else { None };
    Ok(match fit {
        Some(f) => ConvergenceFit {
            rate_hat: -f.slope,
            noise_floor,
            mu_e_check: -f.slope / tau_e,
            r2: f.r2,
            n_used: used.len(),
            fit_window: (xs[0], xs[xs.len() - 1]),
            reliable: f.r2 >= RELIABLE_R2 && f.slope < 0.0,
        },
        None => ConvergenceFit {
            rate_hat: 0.0,
            noise_floor,
            mu_e_check: 0.0,
            r2: 0.0,
            n_used: used.len(),
            fit_window: used.first().zip(used.last()).map_or((0.0, 0.0), |(a, b)| (a.0, b.0)),
            reliable: false,
        },
    })
}
