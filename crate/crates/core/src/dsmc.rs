//! Direct simulation Monte Carlo for the homogeneous inelastic Boltzmann
//! equation with energy-dependent collision rate `E(t)^{-a}`.
//!
//! Collisions use a no-time-counter scheme: in a step of length `dt` the
//! solver draws `½ N dt λ κ_b u_max` candidate pairs uniformly among all
//! particles (the fractional part is carried to the next step) and accepts a
//! candidate with probability `|u|/u_max`. Accepted pairs get an impact
//! direction from the angular weight and collide with the inelastic map.
//! `λ = E^{-a}` is frozen at the start of each step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ensemble::{InitialDistribution, MomentRecord, MomentSeries, VelocityEnsemble};
use crate::error::{input, Error, Result};
use crate::kernel::{collide_in_place, sample_omega_into, KernelConfig};
use crate::num::{from_usize, lit, to_f64, CompensatedSum, Real};

/// How the collision frequency depends on the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateLaw {
    /// `λ = E^{-a}`, the physical-variable equation.
    EnergyDependent,
    /// `λ = 1`, the collision part of the rescaled drift equation.
    Plain,
}

/// Numerical controls of the collision stepper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsmcParams {
    /// Target collisions per particle per step.
    pub c_target: f64,
    /// `u_max = majorant_factor · max_i |v_i|` at every refresh.
    pub majorant_factor: f64,
    /// Steps between majorant refreshes.
    pub refresh_every: usize,
    /// Largest accepted relative energy change in a single step.
    pub max_rel_energy_change: f64,
}

impl Default for DsmcParams {
    fn default() -> Self {
        Self { c_target: 0.05, majorant_factor: 2.0, refresh_every: 50, max_rel_energy_change: 0.02 }
    }
}

impl DsmcParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_target > 0.0 && self.c_target.is_finite()) {
            return input(format!("c_target must be positive, got {}", self.c_target));
        }
        if !(self.majorant_factor >= 2.0) {
            return input(format!("majorant factor below 2 does not bound pair speeds: {}", self.majorant_factor));
        }
        if self.refresh_every == 0 {
            return input("refresh_every must be at least 1");
        }
        if !(self.max_rel_energy_change > 0.0 && self.max_rel_energy_change < 1.0) {
            return input(format!("max_rel_energy_change must lie in (0, 1), got {}", self.max_rel_energy_change));
        }
        Ok(())
    }
}

/// An accepted collision, reported to step observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent<T> {
    pub i: usize,
    pub j: usize,
    pub u_mag: T,
    /// Change of `|v_i|² + |v_j|²`.
    pub delta_energy: T,
}

/// Callback receiving every accepted collision of a step.
pub type StepObserver<'a, T> = &'a mut dyn FnMut(&CollisionEvent<T>);

/// Callback invoked after every moment record.
pub type RecordHook<'a, T> = &'a mut dyn FnMut(&DsmcState<T>) -> Result<()>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport<T> {
    /// Step length actually taken (halved from the request if the energy
    /// change exceeded the cap).
    pub dt: T,
    pub candidates: u64,
    pub collisions: u64,
    pub breaches: u32,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltReason {
    /// Energy fell below `epsilon_stop`.
    BlowUpResolved,
    /// Simulated time reached `t_max`.
    Horizon,
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HaltReason::BlowUpResolved => "blow-up-resolved",
            HaltReason::Horizon => "horizon",
        })
    }
}

const MAX_STEP_RETRIES: usize = 40;
const EXACT_MEAN_SPEED_LIMIT: usize = 1000;

/// Solver state. Exclusively owned by one stepping loop.
#[derive(Debug, Clone)]
pub struct DsmcState<T> {
    ens: VelocityEnsemble<T>,
    t: T,
    config: KernelConfig<T>,
    params: DsmcParams,
    rate_law: RateLaw,
    u_max: T,
    mean_rel_speed: T,
    energy: T,
    rng: ChaCha8Rng,
    n_collisions: u64,
    n_candidates: u64,
    n_steps: u64,
    n_breaches: u64,
    steps_since_refresh: usize,
    carry: T,
    stats: MomentSeries<T>,
    last_good: Option<(T, VelocityEnsemble<T>)>,
    undo_idx: Vec<(usize, usize)>,
    undo_vel: Vec<T>,
}

impl<T: Real> DsmcState<T> {
    pub fn new(
        config: KernelConfig<T>,
        ens: VelocityEnsemble<T>,
        params: DsmcParams,
        rate_law: RateLaw,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        if ens.dim() != config.dim {
            return input(format!("ensemble has d = {}, kernel has d = {}", ens.dim(), config.dim));
        }
        if !ens.all_finite() {
            return input("initial ensemble contains non-finite velocities");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let dim = ens.dim();
        let mut state = Self {
            energy: ens.energy(),
            ens,
            t: T::zero(),
            config,
            params,
            rate_law,
            u_max: T::zero(),
            mean_rel_speed: T::zero(),
            rng,
            n_collisions: 0,
            n_candidates: 0,
            n_steps: 0,
            n_breaches: 0,
            steps_since_refresh: 0,
            carry: T::zero(),
            stats: MomentSeries::new(dim),
            last_good: None,
            undo_idx: Vec::new(),
            undo_vel: Vec::new(),
        };
        if !(state.energy > T::zero()) {
            return input("initial ensemble has zero energy");
        }
        state.refresh_majorant();
        Ok(state)
    }

    pub fn ensemble(&self) -> &VelocityEnsemble<T> {
        &self.ens
    }

    /// Direct mutable access; the tracked energy and majorant are refreshed
    /// from the modified ensemble on the next [`DsmcState::resync`].
    pub fn ensemble_mut(&mut self) -> &mut VelocityEnsemble<T> {
        &mut self.ens
    }

    pub fn config(&self) -> &KernelConfig<T> {
        &self.config
    }

    pub fn params(&self) -> &DsmcParams {
        &self.params
    }

    pub fn time(&self) -> T {
        self.t
    }

    /// Energy tracked incrementally from per-collision changes.
    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn u_max(&self) -> T {
        self.u_max
    }

    /// Mean pair relative speed measured at the last majorant refresh.
    pub fn mean_rel_speed(&self) -> T {
        self.mean_rel_speed
    }

    pub fn n_collisions(&self) -> u64 {
        self.n_collisions
    }

    pub fn n_candidates(&self) -> u64 {
        self.n_candidates
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn n_breaches(&self) -> u64 {
        self.n_breaches
    }

    pub fn stats(&self) -> &MomentSeries<T> {
        &self.stats
    }

    pub fn into_parts(self) -> (VelocityEnsemble<T>, MomentSeries<T>) {
        (self.ens, self.stats)
    }

    /// Collision frequency factor `λ` at the current energy.
    pub fn rate(&self) -> T {
        match self.rate_law {
            RateLaw::EnergyDependent => self.energy.powf(-self.config.a),
            RateLaw::Plain => T::one(),
        }
    }

    /// Recomputes the energy exactly and refreshes the majorant.
    pub fn resync(&mut self) {
        self.energy = self.ens.energy();
        self.refresh_majorant();
    }

    /// Exact max-speed scan: `u_max = majorant_factor · max|v_i|`, which bounds
    /// every pair speed when the factor is at least 2. Also re-measures the
    /// mean relative speed that sets the step length.
    pub fn refresh_majorant(&mut self) {
        self.u_max = lit::<T>(self.params.majorant_factor) * self.ens.max_speed();
        self.mean_rel_speed = mean_relative_speed(&self.ens);
        self.steps_since_refresh = 0;
    }

    /// Step length giving `c_target` expected collisions per particle:
    /// `dt = c_target / (λ κ_b ū)` with `ū` the mean relative speed.
    pub fn choose_dt(&self, c_target: T) -> T {
        c_target / (self.rate() * self.config.kappa_b() * self.mean_rel_speed)
    }

    /// Multiplies all velocities by `factor`, keeping the tracked energy and
    /// the speed scales consistent. Used by the drift half of the rescaled solver.
    pub fn scale_velocities(&mut self, factor: T) {
        self.ens.scale(factor);
        self.energy = self.energy * factor * factor;
        self.u_max = self.u_max * factor;
        self.mean_rel_speed = self.mean_rel_speed * factor;
    }

    pub fn step(&mut self, dt: T) -> Result<StepReport<T>> {
        self.step_observed(dt, None)
    }

    /// Advances by `dt`; accepted collisions of the committed step are passed
    /// to `observer`.
    pub fn step_observed(
        &mut self,
        dt: T,
        mut observer: Option<StepObserver<'_, T>>,
    ) -> Result<StepReport<T>> {
        if !(dt > T::zero()) {
            return input(format!("step length must be positive, got {dt}"));
        }
        if !(self.energy > T::zero()) {
            return input(format!("cannot step a state with energy {}", self.energy));
        }
        let n = self.ens.len();
        let dim = self.ens.dim();
        let nf = from_usize::<T>(n);
        let lambda = self.rate();
        let kappa = self.config.kappa_b();
        let half = lit::<T>(0.5);
        let max_change = lit::<T>(self.params.max_rel_energy_change);
        let mut dt = dt;
        let mut breaches = 0u32;
        let mut events: Vec<CollisionEvent<T>> = Vec::new();
        let mut u = vec![T::zero(); dim];
        let mut omega = vec![T::zero(); dim];

        for _ in 0..MAX_STEP_RETRIES {
            let m_real = half * nf * dt * lambda * kappa * self.u_max + self.carry;
            let m = m_real.floor();
            let carry = m_real - m;
            let m = m.to_u64().unwrap_or(u64::MAX);
            self.undo_idx.clear();
            self.undo_vel.clear();
            events.clear();
            let mut delta = CompensatedSum::new();
            let mut breach = None;

            for _ in 0..m {
                let i = self.rng.random_range(0..n);
                let mut j = self.rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let (vi, vj) = (self.ens.velocity(i), self.ens.velocity(j));
                let mut u2 = T::zero();
                for k in 0..dim {
                    u[k] = vi[k] - vj[k];
                    u2 = u[k].mul_add(u[k], u2);
                }
                let u_mag = u2.sqrt();
                if u_mag > self.u_max {
                    breach = Some(u_mag);
                    break;
                }
                if T::unit_uniform(&mut self.rng) * self.u_max >= u_mag {
                    continue;
                }
                let inv = u_mag.recip();
                u.iter_mut().for_each(|x| *x = *x * inv);
                sample_omega_into(&u, &self.config.b1, &mut self.rng, &mut omega)?;
                self.undo_idx.push((i, j));
                self.undo_vel.extend_from_slice(self.ens.velocity(i));
                self.undo_vel.extend_from_slice(self.ens.velocity(j));
                let (vi, vj) = self.ens.pair_mut(i, j);
                let de = collide_in_place(vi, vj, &omega, self.config.e);
                if !(de.is_finite() && vi.iter().chain(vj.iter()).all(|x| x.is_finite())) {
                    self.undo();
                    return Err(Error::CorruptedState { t: to_f64(self.t), last_good_t: to_f64(self.t) });
                }
                delta.add(de);
                if observer.is_some() {
                    events.push(CollisionEvent { i, j, u_mag, delta_energy: de });
                }
            }

            if let Some(u_mag) = breach {
                self.undo();
                breaches += 1;
                self.n_breaches += 1;
                self.refresh_majorant();
                self.u_max = self.u_max.max(u_mag * lit(self.params.majorant_factor / 2.0));
                continue;
            }
            let de = delta.value() / nf;
            if de.abs() > max_change * self.energy {
                self.undo();
                dt = dt * half;
                continue;
            }

            self.carry = carry;
            self.energy = self.energy + de;
            self.t = self.t + dt;
            self.n_candidates += m;
            let collisions = self.undo_idx.len() as u64;
            self.n_collisions += collisions;
            self.n_steps += 1;
            self.steps_since_refresh += 1;
            if let Some(obs) = observer.as_deref_mut() {
                events.iter().for_each(obs);
            }
            if self.steps_since_refresh >= self.params.refresh_every {
                self.refresh_majorant();
            }
            return Ok(StepReport { dt, candidates: m, collisions, breaches });
        }
        input(format!("step did not converge after {MAX_STEP_RETRIES} retries at t = {}", self.t))
    }

    fn undo(&mut self) {
        let dim = self.ens.dim();
        for (k, &(i, j)) in self.undo_idx.iter().enumerate().rev() {
            let base = 2 * k * dim;
            self.ens.velocity_mut(i).copy_from_slice(&self.undo_vel[base..base + dim]);
            self.ens.velocity_mut(j).copy_from_slice(&self.undo_vel[base + dim..base + 2 * dim]);
        }
        self.undo_idx.clear();
        self.undo_vel.clear();
    }

    /// Appends a moment record at the current time, resynchronizing the tracked
    /// energy. A non-finite ensemble is rolled back to the previous record.
    pub fn record(&mut self, dt: T) -> Result<()> {
        if !self.ens.all_finite() {
            let last_good_t = self.last_good.as_ref().map_or(f64::NAN, |(t, _)| to_f64(*t));
            if let Some((t, ens)) = self.last_good.clone() {
                self.ens = ens;
                self.t = t;
                self.energy = self.ens.energy();
            }
            return Err(Error::CorruptedState { t: to_f64(self.t), last_good_t });
        }
        let rec = MomentRecord::from_ensemble(self.t, &self.ens, self.n_collisions, dt);
        self.energy = rec.energy;
        if self.stats.last().is_some_and(|r| r.t >= self.t) {
            return Ok(());
        }
        self.stats.push(rec)?;
        self.last_good = Some((self.t, self.ens.clone()));
        Ok(())
    }

    /// Steps with `choose_dt` until the energy drops below `epsilon_stop` or
    /// the time reaches `t_max`, recording every `record_every` steps.
    pub fn run(
        &mut self,
        epsilon_stop: T,
        t_max: T,
        record_every: usize,
        mut on_record: Option<RecordHook<'_, T>>,
    ) -> Result<HaltReason> {
        if !(epsilon_stop > T::zero() && epsilon_stop < T::one()) {
            return input(format!("epsilon_stop must lie in (0, 1), got {epsilon_stop}"));
        }
        if !(t_max > self.t) {
            return input(format!("t_max must exceed the current time, got {t_max}"));
        }
        let record_every = record_every.max(1);
        if self.stats.is_empty() {
            self.record(T::zero())?;
            if let Some(cb) = on_record.as_deref_mut() {
                cb(self)?;
            }
        }
        let c_target = lit::<T>(self.params.c_target);
        let mut since_record = 0usize;
        loop {
            let halt = if self.energy < epsilon_stop {
                Some(HaltReason::BlowUpResolved)
            } else if self.t >= t_max {
                Some(HaltReason::Horizon)
            } else {
                None
            };
            if let Some(reason) = halt {
                if since_record > 0 {
                    let dt = self.stats.last().map_or(T::zero(), |r| r.dt);
                    self.record(dt)?;
                    if let Some(cb) = on_record.as_deref_mut() {
                        cb(self)?;
                    }
                }
                return Ok(reason);
            }
            let dt = self.choose_dt(c_target).min(t_max - self.t);
            let report = self.step(dt)?;
            since_record += 1;
            if since_record >= record_every || self.energy < epsilon_stop || self.t >= t_max {
                self.record(report.dt)?;
                since_record = 0;
                if let Some(cb) = on_record.as_deref_mut() {
                    cb(self)?;
                }
            }
        }
    }
}

/// Mean pair speed: exact over all pairs for small ensembles, otherwise over
/// the index-shifted pairs `(i, i+k)` for `k = 1, 2, 3`.
pub fn mean_relative_speed<T: Real>(ens: &VelocityEnsemble<T>) -> T {
    let n = ens.len();
    let dim = ens.dim();
    let dist = |i: usize, j: usize| {
        let (a, b) = (ens.velocity(i), ens.velocity(j));
        (0..dim).fold(T::zero(), |acc, k| (a[k] - b[k]).mul_add(a[k] - b[k], acc)).sqrt()
    };
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    if n <= EXACT_MEAN_SPEED_LIMIT {
        for i in 0..n {
            for j in i + 1..n {
                acc.add(dist(i, j));
                count += 1;
            }
        }
    } else {
        for k in 1..=3 {
            for i in 0..n {
                acc.add(dist(i, (i + k) % n));
                count += 1;
            }
        }
    }
    let mean = acc.value() / from_usize(count.max(1));
    // a degenerate ensemble still needs a finite step
    if mean > T::zero() {
        mean
    } else {
        T::min_positive_value()
    }
}

/// Controls of a physical-variable run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub dsmc: DsmcParams,
    pub epsilon_stop: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub init: InitialDistribution,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            dsmc: DsmcParams::default(),
            epsilon_stop: 1e-6,
            t_max: 1e3,
            record_every: 1,
            init: InitialDistribution::Maxwellian,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhysicalRun<T> {
    pub series: MomentSeries<T>,
    pub state: DsmcState<T>,
    pub halt: HaltReason,
}

/// Initializes `n` particles from `seed` and integrates the physical equation.
pub fn run_physical<T: Real>(
    config: &KernelConfig<T>,
    n: usize,
    seed: u64,
    params: &PhysicalParams,
) -> Result<PhysicalRun<T>> {
    let ens = VelocityEnsemble::init(n, config.dim, params.init, seed)?;
    let mut state = DsmcState::new(config.clone(), ens, params.dsmc, RateLaw::EnergyDependent, seed)?;
    let halt = state.run(lit(params.epsilon_stop), lit(params.t_max), params.record_every, None)?;
    Ok(PhysicalRun { series: state.stats().clone(), state, halt })
}
