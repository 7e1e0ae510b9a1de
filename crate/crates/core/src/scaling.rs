//! Nonlinear self-similar change of variables between the physical and the
//! rescaled frame: `V' = τ E(f)^{-a}`, `V(0) = 1`, `T = log(V)/τ`.

use serde::Serialize;

use crate::ensemble::{MomentSeries, VelocityEnsemble};
use crate::error::{input, Result};
use crate::num::{lit, to_f64, Real};

/// Scaling factor and rescaled time on the grid of a physical energy history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingMap {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub tau: f64,
    pub a: f64,
}

impl ScalingMap {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `V` at physical time `t`, interpolated linearly between grid points.
    pub fn v_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.t, &self.v, t, false)
    }
}

/// Integrates `V' = τ E^{-a}` by the trapezoid rule on the record grid,
/// starting from `V = 1` at the first record.
pub fn build_scaling_map<T: Real>(history: &MomentSeries<T>, tau: f64, a: f64) -> Result<ScalingMap> {
    if !(tau > 0.0 && tau.is_finite()) {
        return input(format!("drift strength must be positive, got {tau}"));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return input(format!("anomaly exponent must be non-negative, got {a}"));
    }
    let recs = history.records();
    if recs.is_empty() {
        return input("empty energy history");
    }
    if let Some(r) = recs.iter().find(|r| !(r.energy > T::zero())) {
        return input(format!("non-positive energy {} at t = {}", r.energy, r.t));
    }
    let t: Vec<f64> = recs.iter().map(|r| to_f64(r.t)).collect();
    let rate: Vec<f64> = recs.iter().map(|r| tau * to_f64(r.energy).powf(-a)).collect();
    let mut v = Vec::with_capacity(t.len());
    v.push(1.0);
    for k in 1..t.len() {
        let prev = v[k - 1];
        v.push(prev + 0.5 * (t[k] - t[k - 1]) * (rate[k] + rate[k - 1]));
    }
    let s = v.iter().map(|x| x.ln() / tau).collect();
    Ok(ScalingMap { t, v, s, tau, a })
}

/// Largest relative mismatch of `E(g)(T(t)) = V(t)² E(f)(t)` over the
/// physical records, with `E(g)` interpolated linearly in `log E`.
pub fn verify_energy_coupling<T: Real>(
    physical: &MomentSeries<T>,
    rescaled: &MomentSeries<T>,
    map: &ScalingMap,
) -> Result<f64> {
    let recs = physical.records();
    if recs.len() != map.len() || recs.iter().zip(&map.t).any(|(r, &t)| to_f64(r.t) != t) {
        return input("scaling map was not built on the physical series' time grid");
    }
    let s: Vec<f64> = rescaled.records().iter().map(|r| to_f64(r.t)).collect();
    let log_e: Vec<f64> = rescaled
        .records()
        .iter()
        .map(|r| to_f64(r.energy).ln())
        .collect();
    if log_e.iter().any(|x| !x.is_finite()) {
        return input("rescaled series has non-positive energies");
    }
    let (Some(&s_lo), Some(&s_hi)) = (s.first(), s.last()) else {
        return input("empty rescaled series");
    };
    let slack = 1e-9 * (s_hi - s_lo).abs().max(1.0);
    let mut worst = 0.0f64;
    for (k, r) in recs.iter().enumerate() {
        let tk = map.s[k];
        if tk < s_lo - slack || tk > s_hi + slack {
            return input(format!(
                "rescaled series covers [{s_lo}, {s_hi}] but T = {tk} is required"
            ));
        }
        let eg = interpolate(&s, &log_e, tk.clamp(s_lo, s_hi), false)
            .expect("clamped into range")
            .exp();
        let mapped = map.v[k] * map.v[k] * to_f64(r.energy);
        worst = worst.max((eg - mapped).abs() / eg);
    }
    Ok(worst)
}

/// Particle-level frame change `w_i = V v_i`.
pub fn map_ensemble_to_rescaled<T: Real>(ens: &VelocityEnsemble<T>, v_t: f64) -> Result<VelocityEnsemble<T>> {
    if !(v_t > 0.0 && v_t.is_finite()) {
        return input(format!("scaling factor must be positive, got {v_t}"));
    }
    let mut out = ens.clone();
    if v_t != 1.0 {
        out.scale(lit(v_t));
    }
    Ok(out)
}

/// Piecewise-linear interpolation on an increasing grid; `None` outside it
/// unless `extrapolate` is set.
fn interpolate(xs: &[f64], ys: &[f64], x: f64, extrapolate: bool) -> Option<f64> {
    let n = xs.len();
    if n == 0 || (!extrapolate && (x < xs[0] || x > xs[n - 1])) {
        return None;
    }
    if n == 1 {
        return Some(ys[0]);
    }
    let k = xs.partition_point(|&g| g <= x).clamp(1, n - 1);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    if x1 == x0 {
        return Some(y1);
    }
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}
