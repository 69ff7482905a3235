use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fractional::Hurst;
use crate::grid::{Path, TimeGrid};
use crate::Real;

/// Noise scale `δ` and time-scale ratio `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams<T> {
    pub delta: T,
    pub eps: T,
}

impl<T: Real> ScaleParams<T> {
    pub fn new(delta: T, eps: T) -> Result<Self> {
        if !(delta > T::zero() && delta.is_finite()) || !(eps > T::zero() && eps.is_finite()) {
            return domain(format!("scale parameters must be positive, got delta={delta}, eps={eps}"));
        }
        Ok(Self { delta, eps })
    }

    pub fn ratio(&self) -> T {
        self.eps / self.delta
    }
}

/// Checks a `(δ, ε)` ladder: `δ` strictly decreasing and `ε/δ` strictly
/// decreasing along it.
pub fn validate_ladder<T: Real>(ladder: &[ScaleParams<T>]) -> Result<()> {
    for w in ladder.windows(2) {
        if !(w[1].delta < w[0].delta) {
            return Err(Error::Config(format!(
                "scale parameters: delta ladder must be strictly decreasing ({} then {})",
                w[0].delta, w[1].delta
            )));
        }
        if !(w[1].ratio() < w[0].ratio()) {
            return Err(Error::Config(format!(
                "scale parameters: eps/delta must decrease to 0 along the ladder ({} then {})",
                w[0].ratio(),
                w[1].ratio()
            )));
        }
    }
    Ok(())
}

/// Particle simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub grid: TimeGrid<T>,
    pub hurst: Hurst<T>,
    pub particles: usize,
    /// Fast substeps per slow step; `0` picks the smallest count with
    /// `Δt / S ≤ ε / 10`.
    pub fast_substeps: usize,
    pub seed: u64,
    pub x0: Vec<T>,
    pub y0: Vec<T>,
}

impl<T: Real> SimConfig<T> {
    pub fn new(grid: TimeGrid<T>, hurst: Hurst<T>, particles: usize, seed: u64, x0: Vec<T>, y0: Vec<T>) -> Self {
        Self { grid, hurst, particles, fast_substeps: 0, seed, x0, y0 }
    }

    /// Effective substep count for time-scale ratio `eps`.
    pub fn substeps_for(&self, eps: T) -> Result<usize> {
        let dt = self.grid.dt();
        let limit = eps / T::lit(10.0);
        if self.fast_substeps == 0 {
            let s = (dt / limit).ceil().to_usize().unwrap_or(usize::MAX).max(1);
            return Ok(s);
        }
        let s = self.fast_substeps;
        if dt / T::from_usize_exact(s) > limit * (T::one() + T::epsilon() * T::lit(8.0)) {
            return Err(Error::Config(format!(
                "fast step {} exceeds eps/10 = {}; use at least {} substeps",
                (dt / T::from_usize_exact(s)).as_f64(),
                limit.as_f64(),
                (dt / limit).ceil().as_f64()
            )));
        }
        Ok(s)
    }

    pub(crate) fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("at least one particle is required".into()));
        }
        if self.x0.len() != n || self.y0.len() != m {
            return Err(Error::Dimension(format!(
                "initial state dims ({}, {}) do not match coefficients ({n}, {m})",
                self.x0.len(),
                self.y0.len()
            )));
        }
        Ok(())
    }
}

/// Node-sampled paths of `P` particles, stored particle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    grid: TimeGrid<T>,
    dim: usize,
    particles: usize,
    data: Vec<T>,
}

impl<T: Real> Ensemble<T> {
    pub fn zeros(grid: TimeGrid<T>, dim: usize, particles: usize) -> Self {
        Self { grid, dim, particles, data: vec![T::zero(); particles * (grid.steps() + 1) * dim] }
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn particles(&self) -> usize {
        self.particles
    }

    #[inline]
    fn stride(&self) -> usize {
        (self.grid.steps() + 1) * self.dim
    }

    /// Whole path of particle `p`, node-major.
    #[inline]
    pub fn path_values(&self, p: usize) -> &[T] {
        let s = self.stride();
        &self.data[p * s..(p + 1) * s]
    }

    #[inline]
    pub fn path_values_mut(&mut self, p: usize) -> &mut [T] {
        let s = self.stride();
        &mut self.data[p * s..(p + 1) * s]
    }

    #[inline]
    pub fn at(&self, p: usize, k: usize) -> &[T] {
        let base = p * self.stride() + k * self.dim;
        &self.data[base..base + self.dim]
    }

    pub fn path(&self, p: usize) -> Path<T> {
        Path::from_values(self.grid, self.dim, self.path_values(p).to_vec()).expect("consistent ensemble layout")
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn chunks_mut(&mut self) -> std::slice::ChunksExactMut<'_, T> {
        let s = self.stride();
        self.data.chunks_exact_mut(s)
    }

    /// `max_k |X^p_k - other_k|` for particle `p` against a single path.
    pub fn sup_distance_to(&self, p: usize, other: &Path<T>) -> T {
        (0..=self.grid.steps())
            .map(|k| self.at(p, k).iter().zip(other.at(k)).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt())
            .fold(T::zero(), T::max)
    }

    /// `max_k |X^p_k - Y^p_k|` between two ensembles on the same layout.
    pub fn sup_distance_pair(&self, other: &Self, p: usize) -> T {
        (0..=self.grid.steps())
            .map(|k| self.at(p, k).iter().zip(other.at(p, k)).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt())
            .fold(T::zero(), T::max)
    }
}

/// Mean and second moment of the empirical law at one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawSummary<T> {
    pub mean: Vec<T>,
    pub second_moment: T,
}
