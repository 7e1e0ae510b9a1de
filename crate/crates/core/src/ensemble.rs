//! Equal-weight particle ensembles and the moment records taken from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::num::{from_usize, lit, CompensatedSum, Real};
use crate::profile::ProfileHistogram;

/// Initial velocity law, before normalization to zero momentum and unit energy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialDistribution {
    #[default]
    Maxwellian,
    UniformBall,
    /// Two Maxwellian halves whose temperatures differ by `ratio`.
    TwoTemperature { ratio: f64 },
}

/// `N` velocity vectors of dimension `d`, each carrying mass `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEnsemble<T> {
    data: Vec<T>,
    dim: usize,
}

impl<T: Real> VelocityEnsemble<T> {
    /// Wraps row-major velocity data (`n * dim` values).
    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim < 2 {
            return input(format!("dimension must be at least 2, got {dim}"));
        }
        if !data.len().is_multiple_of(dim) {
            return input(format!("{} values do not split into {dim}-vectors", data.len()));
        }
        if data.len() / dim < 2 {
            return input("an ensemble needs at least two particles");
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return input(format!("non-finite velocity component at particle {}", i / dim));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return input("velocity rows have inconsistent dimensions");
        }
        Self::from_flat(dim, rows.concat())
    }

    /// Samples `n` velocities from `dist` and normalizes them to zero momentum
    /// and unit energy. Deterministic in `seed`.
    pub fn init(n: usize, dim: usize, dist: InitialDistribution, seed: u64) -> Result<Self> {
        if n < 2 {
            return input(format!("an ensemble needs at least two particles, got {n}"));
        }
        if dim < 2 {
            return input(format!("dimension must be at least 2, got {dim}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![T::zero(); n * dim];
        match dist {
            InitialDistribution::Maxwellian => {
                data.iter_mut().for_each(|x| *x = T::standard_normal(&mut rng));
            }
            InitialDistribution::UniformBall => {
                let inv_dim = lit::<T>(1.0 / dim as f64);
                for row in data.chunks_exact_mut(dim) {
                    crate::kernel::uniform_direction(&mut rng, row);
                    let r = T::unit_uniform(&mut rng).powf(inv_dim);
                    row.iter_mut().for_each(|x| *x = *x * r);
                }
            }
            InitialDistribution::TwoTemperature { ratio } => {
                if !(ratio > 0.0 && ratio.is_finite()) {
                    return input(format!("temperature ratio must be positive, got {ratio}"));
                }
                let hot = lit::<T>(ratio.sqrt());
                for (i, row) in data.chunks_exact_mut(dim).enumerate() {
                    let scale = if i % 2 == 0 { T::one() } else { hot };
                    row.iter_mut().for_each(|x| *x = T::standard_normal(&mut rng) * scale);
                }
            }
        }
        let mut ens = Self::from_flat(dim, data)?;
        ens.normalize_to_g()?;
        Ok(ens)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn velocity_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocities(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    #[cfg(test)]
    pub(crate) fn as_flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Mutable access to two distinct particles.
    #[inline]
    pub fn pair_mut(&mut self, i: usize, j: usize) -> (&mut [T], &mut [T]) {
        assert_ne!(i, j, "pair_mut needs distinct particles");
        let d = self.dim;
        if i < j {
            let (lo, hi) = self.data.split_at_mut(j * d);
            (&mut lo[i * d..(i + 1) * d], &mut hi[..d])
        } else {
            let (lo, hi) = self.data.split_at_mut(i * d);
            (&mut hi[..d], &mut lo[j * d..(j + 1) * d])
        }
    }

    #[inline]
    pub fn speed_squared(&self, i: usize) -> T {
        self.velocity(i).iter().fold(T::zero(), |acc, &x| x.mul_add(x, acc))
    }

    /// Empirical moment `m_l = (1/N) Σ |v_i|^{2l}`.
    pub fn moment(&self, l: T) -> T {
        if l == T::zero() {
            return T::one();
        }
        let mut acc = CompensatedSum::new();
        for i in 0..self.len() {
            let s2 = self.speed_squared(i);
            let term = if l == T::one() {
                s2
            } else if l == lit(0.5) {
                s2.sqrt()
            } else if l == lit(1.5) {
                s2 * s2.sqrt()
            } else if l == lit(2.0) {
                s2 * s2
            } else {
                s2.powf(l)
            };
            acc.add(term);
        }
        acc.value() / from_usize(self.len())
    }

    /// Kinetic energy `(1/N) Σ |v_i|²`.
    pub fn energy(&self) -> T {
        self.moment(T::one())
    }

    /// Energy and the half-integer moments in a single pass.
    pub fn moments(&self) -> Moments<T> {
        let mut e = CompensatedSum::new();
        let mut half = CompensatedSum::new();
        let mut three_half = CompensatedSum::new();
        for i in 0..self.len() {
            let s2 = self.speed_squared(i);
            let s = s2.sqrt();
            e.add(s2);
            half.add(s);
            three_half.add(s2 * s);
        }
        let n = from_usize::<T>(self.len());
        Moments { energy: e.value() / n, m_half: half.value() / n, m_three_half: three_half.value() / n }
    }

    /// Mean velocity (the momentum of the unit-mass distribution).
    pub fn mean_velocity(&self) -> Vec<T> {
        let n = from_usize::<T>(self.len());
        (0..self.dim)
            .map(|k| {
                let mut acc = CompensatedSum::new();
                for row in self.velocities() {
                    acc.add(row[k]);
                }
                acc.value() / n
            })
            .collect()
    }

    pub fn max_speed(&self) -> T {
        (0..self.len()).map(|i| self.speed_squared(i)).fold(T::zero(), T::max).sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Multiplies every velocity by `factor`.
    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|x| *x = *x * factor);
    }

    /// Moves the ensemble into the class of zero-momentum, unit-energy
    /// distributions.
    pub fn normalize_to_g(&mut self) -> Result<()> {
        let tol = T::epsilon() * crate::num::lit(64.0);
        let mean = self.mean_velocity();
        let drift = mean.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if drift <= tol && (self.energy() - T::one()).abs() <= tol {
            return Ok(());
        }
        for row in self.data.chunks_exact_mut(self.dim) {
            row.iter_mut().zip(&mean).for_each(|(x, m)| *x = *x - *m);
        }
        let e = self.energy();
        if !(e > T::zero()) {
            return input("ensemble has zero energy after removing the mean velocity");
        }
        self.scale(e.sqrt().recip());
        // one correction pass absorbs the rounding left by the first
        let mean = self.mean_velocity();
        for row in self.data.chunks_exact_mut(self.dim) {
            row.iter_mut().zip(&mean).for_each(|(x, m)| *x = *x - *m);
        }
        let e = self.energy();
        self.scale(e.sqrt().recip());
        Ok(())
    }

    /// Mass-normalized histogram of speeds on `bins` equal bins over `[0, v_max)`
    /// plus an overflow bin.
    pub fn radial_histogram(&self, bins: usize, v_max: T) -> Result<ProfileHistogram> {
        let mut h = ProfileHistogram::uniform(bins, crate::num::to_f64(v_max))?;
        h.accumulate_speeds((0..self.len()).map(|i| crate::num::to_f64(self.speed_squared(i).sqrt())));
        Ok(h)
    }

    /// Draws `n` particles uniformly without replacement into a new ensemble.
    pub fn subsample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Self> {
        let idx = rand::seq::index::sample(rng, self.len(), n.min(self.len()));
        let mut data = Vec::with_capacity(n * self.dim);
        for i in idx.iter() {
            data.extend_from_slice(self.velocity(i));
        }
        Self::from_flat(self.dim, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub energy: T,
    pub m_half: T,
    pub m_three_half: T,
}

/// One time-stamped diagnostic record.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord<T> {
    pub t: T,
    pub energy: T,
    pub m_half: Option<T>,
    pub m_three_half: Option<T>,
    pub momentum: Vec<T>,
    pub n_collisions: u64,
    pub dt: T,
}

impl<T: Real> MomentRecord<T> {
    pub fn from_ensemble(t: T, ens: &VelocityEnsemble<T>, n_collisions: u64, dt: T) -> Self {
        let m = ens.moments();
        Self {
            t,
            energy: m.energy,
            m_half: Some(m.m_half),
            m_three_half: Some(m.m_three_half),
            momentum: ens.mean_velocity(),
            n_collisions,
            dt,
        }
    }
}

/// Time series of moment records with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries<T> {
    dim: usize,
    records: Vec<MomentRecord<T>>,
}

impl<T: Real> MomentSeries<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, records: Vec::new() }
    }

    /// Builds a series from `(t, E)` pairs only; used for synthetic laws and
    /// analysis of externally produced data.
    pub fn from_energy(dim: usize, points: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let mut s = Self::new(dim);
        for (t, energy) in points {
            s.push(MomentRecord {
                t,
                energy,
                m_half: None,
                m_three_half: None,
                momentum: vec![T::zero(); dim],
                n_collisions: 0,
                dt: T::zero(),
            })?;
        }
        Ok(s)
    }

    pub fn push(&mut self, rec: MomentRecord<T>) -> Result<()> {
        if let Some(last) = self.records.last() {
            if !(rec.t > last.t) {
                return input(format!("record times must increase strictly: {} after {}", rec.t, last.t));
            }
        }
        if !(rec.energy >= T::zero()) {
            return input(format!("negative or NaN energy {} at t = {}", rec.energy, rec.t));
        }
        if rec.momentum.len() != self.dim {
            return input(format!("momentum has {} components, series has d = {}", rec.momentum.len(), self.dim));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[MomentRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&MomentRecord<T>> {
        self.records.last()
    }

    pub fn times(&self) -> Vec<T> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn energies(&self) -> Vec<T> {
        self.records.iter().map(|r| r.energy).collect()
    }

    /// Records with `t <= t_end`.
    pub fn truncated(&self, t_end: T) -> Self {
        Self { dim: self.dim, records: self.records.iter().filter(|r| r.t <= t_end).cloned().collect() }
    }
}
