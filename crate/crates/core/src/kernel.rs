//! Collision microphysics: the inelastic post-collisional map, impact
//! direction sampling under a bounded angular weight, and the dissipation rate.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::num::{integrate, lit, to_f64, unit_sphere_area, Real};

/// Iteration cap of the rejection sampler.
pub const REJECTION_GUARD: usize = 1_000_000;

const MASS_TOLERANCE: f64 = 1e-6;

/// Angular weight `b1` of the cross section, as a function of the cosine
/// `x = û·ω`, together with its declared bounds `beta1 <= b1 <= beta2`.
///
/// The sphere integrals of `b1` (its mass and second moment in `x`) are
/// computed once at construction.
#[derive(Clone)]
pub struct AngularWeight {
    kind: AngularKind,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    dim: usize,
    beta1: f64,
    beta2: f64,
    sphere_mass: f64,
    first_moment: f64,
    second_moment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AngularKind {
    Isotropic,
    LinearAnisotropy { coefficient: f64 },
    Custom { label: String },
}

impl fmt::Debug for AngularWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AngularWeight")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("beta1", &self.beta1)
            .field("beta2", &self.beta2)
            .field("sphere_mass", &self.sphere_mass)
            .finish()
    }
}

/// Integral over the unit sphere of R^dim of `phi(û·ω)`, reduced to the polar
/// angle: |S^{d-2}| ∫_0^π phi(cos θ) sin^{d-2} θ dθ.
pub fn sphere_integral<F: Fn(f64) -> f64>(dim: usize, phi: F) -> f64 {
    let ring = unit_sphere_area(dim - 1);
    let p = dim as i32 - 2;
    ring * integrate(|th| phi(th.cos()) * th.sin().powi(p), 0.0, std::f64::consts::PI, 32, 24)
}

impl AngularWeight {
    /// `b1 = 1/|S^{d-1}|`.
    pub fn isotropic(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let c = 1.0 / unit_sphere_area(dim);
        Self::build(AngularKind::Isotropic, Arc::new(move |_| c), dim, c, c)
    }

    /// `b1(x) = (1 + coefficient·x)/|S^{d-1}|` with `|coefficient| < 1`.
    pub fn linear(dim: usize, coefficient: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(coefficient.abs() < 1.0) {
            return input(format!("linear anisotropy coefficient must satisfy |c| < 1, got {coefficient}"));
        }
        let z = unit_sphere_area(dim);
        Self::build(
            AngularKind::LinearAnisotropy { coefficient },
            Arc::new(move |x| (1.0 + coefficient * x) / z),
            dim,
            (1.0 - coefficient.abs()) / z,
            (1.0 + coefficient.abs()) / z,
        )
    }

    /// User supplied weight with declared bounds. The bounds and the unit
    /// sphere mass are verified numerically.
    pub fn custom<F>(dim: usize, label: impl Into<String>, func: F, beta1: f64, beta2: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_dim(dim)?;
        Self::build(AngularKind::Custom { label: label.into() }, Arc::new(func), dim, beta1, beta2)
    }

    fn build(
        kind: AngularKind,
        func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        dim: usize,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self> {
        if !(beta1 > 0.0 && beta1 <= beta2 && beta2.is_finite()) {
            return input(format!("angular bounds must satisfy 0 < beta1 <= beta2 < inf, got {beta1}, {beta2}"));
        }
        let tol = 1e-12 * beta2;
        for k in 0..=2000 {
            let x = -1.0 + k as f64 / 1000.0;
            let b = func(x);
            if !(b >= beta1 - tol && b <= beta2 + tol) {
                return input(format!("b1({x}) = {b} outside declared bounds [{beta1}, {beta2}]"));
            }
        }
        let sphere_mass = sphere_integral(dim, |x| func(x));
        if (sphere_mass - 1.0).abs() > MASS_TOLERANCE {
            return input(format!("b1 must have unit mass on the sphere, got {sphere_mass}"));
        }
        let first_moment = sphere_integral(dim, |x| x * func(x));
        let second_moment = sphere_integral(dim, |x| x * x * func(x));
        Ok(Self { kind, func, dim, beta1, beta2, sphere_mass, first_moment, second_moment })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    pub fn kind(&self) -> &AngularKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// ∫ b1(û·ω) dω over the sphere; 1 under the normalization hypothesis.
    pub fn sphere_mass(&self) -> f64 {
        self.sphere_mass
    }

    /// ∫ (û·ω) b1(û·ω) dω.
    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    /// ∫ (û·ω)² b1(û·ω) dω.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    fn is_constant(&self) -> bool {
        self.beta1 == self.beta2
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return input(format!("dimension must be at least 2, got {dim}"));
    }
    Ok(())
}

/// Collision kernel parameters.
#[derive(Debug, Clone)]
pub struct KernelConfig<T> {
    pub dim: usize,
    /// Restitution coefficient.
    pub e: T,
    /// Anomaly exponent of the energy-dependent cross section.
    pub a: T,
    /// Drift strength of the rescaled equation.
    pub tau: T,
    pub b1: AngularWeight,
    /// Permits `e = 1`, used only for conservation diagnostics.
    pub elastic_diagnostics: bool,
}

impl<T: Real> KernelConfig<T> {
    /// Isotropic kernel with `tau` defaulting to `1 - e`.
    pub fn new(dim: usize, e: T, a: T) -> Result<Self> {
        let cfg = Self {
            dim,
            e,
            a,
            tau: T::one() - e,
            b1: AngularWeight::isotropic(dim)?,
            elastic_diagnostics: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Elastic (`e = 1`) kernel for conservation diagnostics.
    pub fn elastic(dim: usize, a: T) -> Result<Self> {
        let cfg = Self {
            dim,
            e: T::one(),
            a,
            tau: T::zero(),
            b1: AngularWeight::isotropic(dim)?,
            elastic_diagnostics: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tau(mut self, tau: T) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn with_angular_weight(mut self, b1: AngularWeight) -> Result<Self> {
        self.b1 = b1;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        let e = to_f64(self.e);
        let upper_ok = if self.elastic_diagnostics { e <= 1.0 } else { e < 1.0 };
        if !(e >= 0.0 && upper_ok) {
            return input(format!(
                "restitution coefficient must lie in [0, 1){}, got {e}",
                if self.elastic_diagnostics { " or equal 1 in diagnostics mode" } else { "" }
            ));
        }
        let a = to_f64(self.a);
        if !(a >= 0.0 && a.is_finite()) {
            return input(format!("anomaly exponent must be finite and >= 0, got {a}"));
        }
        let tau = to_f64(self.tau);
        if !(tau >= 0.0 && tau.is_finite()) {
            return input(format!("drift strength must be finite and >= 0, got {tau}"));
        }
        if self.b1.dim() != self.dim {
            return input(format!("angular weight built for d = {}, kernel has d = {}", self.b1.dim(), self.dim));
        }
        Ok(())
    }

    /// Mass of `b1` on the sphere, the `κ_b` factor of the pair collision rate.
    pub fn kappa_b(&self) -> T {
        lit(self.b1.sphere_mass())
    }
}

/// Result of a single binary collision.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionOutcome<T> {
    pub v_prime: Vec<T>,
    pub vstar_prime: Vec<T>,
    /// Shared impulse `((1+e)/2)(u·ω)ω`, subtracted from `v` and added to `v_*`.
    pub impulse: Vec<T>,
    /// `-(1-e²)/2 (u·ω)²`, the change of `|v|² + |v_*|²`.
    pub delta_energy: T,
}

/// Unit-norm tolerance for impact directions.
pub fn unit_tolerance<T: Real>() -> T {
    lit::<T>(1e-12).max(T::epsilon() * lit(16.0))
}

/// Post-collisional velocities for impact direction `omega`.
pub fn collide<T: Real>(v: &[T], v_star: &[T], omega: &[T], e: T) -> Result<CollisionOutcome<T>> {
    if v.len() != v_star.len() || v.len() != omega.len() {
        return input(format!(
            "dimension mismatch: |v| = {}, |v*| = {}, |omega| = {}",
            v.len(),
            v_star.len(),
            omega.len()
        ));
    }
    let norm2 = omega.iter().fold(T::zero(), |acc, &w| w.mul_add(w, acc));
    if (norm2.sqrt() - T::one()).abs() > unit_tolerance() {
        return Err(Error::Precondition(format!("impact direction has norm {}", norm2.sqrt())));
    }
    let mut v_prime = v.to_vec();
    let mut vstar_prime = v_star.to_vec();
    let mut impulse = vec![T::zero(); v.len()];
    let delta_energy = apply_collision(&mut v_prime, &mut vstar_prime, omega, e, Some(&mut impulse));
    Ok(CollisionOutcome { v_prime, vstar_prime, impulse, delta_energy })
}

/// In-place collision on two velocity slices; returns the change of
/// `|v|² + |v_*|²`. Inputs are not validated.
#[inline]
pub fn collide_in_place<T: Real>(v: &mut [T], v_star: &mut [T], omega: &[T], e: T) -> T {
    apply_collision(v, v_star, omega, e, None)
}

#[inline]
fn apply_collision<T: Real>(v: &mut [T], v_star: &mut [T], omega: &[T], e: T, mut impulse: Option<&mut [T]>) -> T {
    let half = lit::<T>(0.5);
    let (normal, normal_lo) = normal_component(v, v_star, omega);
    let c = half * normal.mul_add(e, normal);
    for k in 0..omega.len() {
        let j = c * omega[k];
        v[k] = v[k] - j;
        v_star[k] = v_star[k] + j;
        if let Some(imp) = impulse.as_deref_mut() {
            imp[k] = j;
        }
    }
    let normal2 = normal.mul_add(normal, lit::<T>(2.0) * normal * normal_lo);
    -(half * (-e).mul_add(e, T::one())) * normal2
}

/// `(v - v_*)·ω` as an unevaluated sum `hi + lo`, by a compensated dot
/// product over the exact differences.
#[inline]
fn normal_component<T: Real>(v: &[T], v_star: &[T], omega: &[T]) -> (T, T) {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for k in 0..omega.len() {
        let (d, d_lo) = two_sum(v[k], -v_star[k]);
        let p = d * omega[k];
        let p_lo = d.mul_add(omega[k], -p);
        let (s, s_lo) = two_sum(sum, p);
        sum = s;
        comp = comp + s_lo + p_lo + d_lo * omega[k];
    }
    let hi = sum + comp;
    (hi, comp - (hi - sum))
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Fills `out` with a uniformly distributed unit vector.
#[inline]
pub fn uniform_direction<T: Real, R: Rng + ?Sized>(rng: &mut R, out: &mut [T]) {
    loop {
        let mut n2 = T::zero();
        for x in out.iter_mut() {
            *x = T::standard_normal(rng);
            n2 = x.mul_add(*x, n2);
        }
        if n2 > T::min_positive_value() {
            let inv = n2.sqrt().recip();
            out.iter_mut().for_each(|x| *x = *x * inv);
            return;
        }
    }
}

/// Draws an impact direction with density proportional to `b1(û·ω)` on the
/// sphere, by uniform proposals accepted with probability `b1(û·ω)/beta2`.
/// Returns the number of proposals used.
pub fn sample_omega_into<T: Real, R: Rng + ?Sized>(
    u_hat: &[T],
    b1: &AngularWeight,
    rng: &mut R,
    out: &mut [T],
) -> Result<usize> {
    let constant = b1.is_constant();
    for iter in 1..=REJECTION_GUARD {
        uniform_direction(rng, out);
        if constant {
            return Ok(iter);
        }
        let x = u_hat.iter().zip(out.iter()).fold(T::zero(), |acc, (&a, &b)| a.mul_add(b, acc));
        let accept = b1.eval(to_f64(x)) / b1.beta2();
        if to_f64(T::unit_uniform(rng)) < accept {
            return Ok(iter);
        }
    }
    Err(Error::RejectionExhausted(REJECTION_GUARD))
}

pub fn sample_omega<T: Real, R: Rng + ?Sized>(u_hat: &[T], b1: &AngularWeight, rng: &mut R) -> Result<Vec<T>> {
    if u_hat.len() != b1.dim() {
        return input(format!("direction has dimension {}, weight expects {}", u_hat.len(), b1.dim()));
    }
    let mut out = vec![T::zero(); u_hat.len()];
    sample_omega_into(u_hat, b1, rng, &mut out)?;
    Ok(out)
}

/// Dissipation rate D(|u|) = (1-e²)/4 ∫ |u·ω|² b1(û·ω) dω.
pub fn dissipation_rate<T: Real>(u_mag: T, config: &KernelConfig<T>) -> T {
    let e = config.e;
    let quarter = lit::<T>(0.25);
    (T::one() - e) * (T::one() + e) * quarter * u_mag * u_mag * lit(config.b1.second_moment())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_on_half_restitution() {
        let out = collide(&[1.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(out.v_prime, vec![-0.5, 0.0]);
        assert_eq!(out.vstar_prime, vec![0.5, 0.0]);
        assert_eq!(out.delta_energy, -1.5);
    }

    #[test]
    fn head_on_elastic_exchange() {
        let out = collide(&[1.0, 0.0], &[-1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(out.v_prime, vec![-1.0, 0.0]);
        assert_eq!(out.vstar_prime, vec![1.0, 0.0]);
        assert_eq!(out.delta_energy, 0.0);
    }

    #[test]
    fn grazing_collision_is_identity() {
        let v = [0.3, -1.2, 2.0];
        let vs = [0.3, 0.8, -1.0];
        // u = (0, -2, 3) is orthogonal to ω = (1, 0, 0)
        let out = collide(&v, &vs, &[1.0, 0.0, 0.0], 0.2).unwrap();
        assert_eq!(out.v_prime, v.to_vec());
        assert_eq!(out.vstar_prime, vs.to_vec());
        assert_eq!(out.delta_energy, 0.0);
    }

    #[test]
    fn rejects_non_unit_direction_and_bad_dimensions() {
        assert!(matches!(
            collide(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1e-5], 0.5),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(collide(&[1.0, 0.0], &[0.0, 0.0, 0.0], &[1.0, 0.0], 0.5), Err(Error::Input(_))));
    }

    #[test]
    fn angular_weights_validate() {
        for d in 2..=5 {
            let iso = AngularWeight::isotropic(d).unwrap();
            assert!((iso.sphere_mass() - 1.0).abs() < 1e-12);
            assert!((iso.second_moment() - 1.0 / d as f64).abs() < 1e-12);
            assert!(iso.first_moment().abs() < 1e-12);
        }
        assert!(AngularWeight::linear(3, 1.5).is_err());
        assert!(AngularWeight::custom(3, "unnormalized", |_| 1.0, 1.0, 1.0).is_err());
        let z = unit_sphere_area(3);
        assert!(AngularWeight::custom(3, "bad bounds", move |x| (1.0 + 0.5 * x) / z, 0.9 / z, 1.1 / z).is_err());
        assert!(AngularWeight::custom(3, "ok", move |x| (1.0 + 0.5 * x) / z, 0.5 / z, 1.5 / z).is_ok());
    }

    #[test]
    fn config_ranges() {
        assert!(KernelConfig::<f64>::new(3, 1.0, 0.0).is_err());
        assert!(KernelConfig::<f64>::new(3, -0.1, 0.0).is_err());
        assert!(KernelConfig::<f64>::new(3, 0.5, -1.0).is_err());
        assert!(KernelConfig::<f64>::new(1, 0.5, 0.0).is_err());
        assert!(KernelConfig::<f64>::elastic(3, 0.0).is_ok());
        let cfg = KernelConfig::<f64>::new(3, 0.95, 0.0).unwrap();
        assert!((cfg.tau - 0.05).abs() < 1e-15);
        let d2 = AngularWeight::isotropic(2).unwrap();
        assert!(cfg.with_angular_weight(d2).is_err());
    }

    #[test]
    fn dissipation_rate_limits() {
        let elastic = KernelConfig::<f64>::elastic(3, 0.0).unwrap();
        for u in [0.0, 0.5, 3.0] {
            assert_eq!(dissipation_rate(u, &elastic), 0.0);
        }
        let cfg = KernelConfig::<f64>::new(3, 0.5, 0.0).unwrap();
        assert_eq!(dissipation_rate(0.0, &cfg), 0.0);
        // isotropic d = 3: (1 - e²)/4 · |u|²/3
        assert!((dissipation_rate(2.0, &cfg) - 0.75 / 4.0 * 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dissipation_rate_lower_bound() {
        // H2 bound with the exact sphere integral of (û·ω)²: |S^{d-1}|/d
        for d in 2..=5 {
            for coeff in [0.0, 0.3, -0.7] {
                let b1 = AngularWeight::linear(d, coeff).unwrap();
                let beta1 = b1.beta1();
                let cfg = KernelConfig::<f64>::new(d, 0.4, 0.0).unwrap().with_angular_weight(b1).unwrap();
                let u = 1.7;
                let bound = beta1 * (1.0 - 0.16) / 4.0 * unit_sphere_area(d) / d as f64 * u * u;
                assert!(dissipation_rate(u, &cfg) >= bound * (1.0 - 1e-12));
            }
        }
        // the |S^{d-2}| form of the constant holds in two dimensions
        let cfg = KernelConfig::<f64>::new(2, 0.4, 0.0).unwrap();
        let bound = cfg.b1.beta1() * (1.0 - 0.16) / 4.0 * unit_sphere_area(1);
        assert!(dissipation_rate(1.0, &cfg) >= bound);
    }

    #[test]
    fn isotropic_sampler_never_rejects() {
        let b1 = AngularWeight::isotropic(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = [0.0f64; 3];
        for _ in 0..1000 {
            assert_eq!(sample_omega_into(&[0.0, 0.0, 1.0], &b1, &mut rng, &mut out).unwrap(), 1);
            let n: f64 = out.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }
}
