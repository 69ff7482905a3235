use rand::Rng;

use super::{cov_unchecked, Hurst};
use crate::error::Result;
use crate::grid::{Path, TimeGrid};
use crate::linalg::Cholesky;
use crate::rng;
use crate::Real;

/// Exact fBm sampler: Cholesky factor of `[R_H(t_i, t_j)]` over nodes `1..=N`.
///
/// The factor is immutable after construction and can be shared across threads.
#[derive(Debug, Clone)]
pub struct FbmSampler<T> {
    grid: TimeGrid<T>,
    hurst: Hurst<T>,
    chol: Cholesky<T>,
}

impl<T: Real> FbmSampler<T> {
    pub fn new(grid: TimeGrid<T>, hurst: Hurst<T>) -> Result<Self> {
        let n = grid.steps();
        let h = hurst.value();
        let chol = Cholesky::factor(n, |i, j| cov_unchecked(grid.node(i + 1), grid.node(j + 1), h))?;
        Ok(Self { grid, hurst, chol })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn hurst(&self) -> Hurst<T> {
        self.hurst
    }

    /// Diagonal jitter that the factorisation needed.
    pub fn jitter(&self) -> T {
        self.chol.jitter()
    }

    /// Fills `out` (node-major, `(N+1) × dim`) with independent fBm components.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize, out: &mut [T]) {
        let n = self.grid.steps();
        debug_assert_eq!(out.len(), (n + 1) * dim);
        let mut z = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        for i in 0..dim {
            z.iter_mut().for_each(|v| *v = T::sample_normal(rng));
            self.chol.mul_lower(&z, &mut y);
            out[i] = T::zero();
            for k in 0..n {
                out[(k + 1) * dim + i] = y[k];
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> Path<T> {
        let mut p = Path::zeros(self.grid, dim);
        self.sample_into(rng, dim, p.values_mut());
        p
    }
}

/// Samples one `dim`-dimensional fBm path, deterministic in `seed`.
pub fn sample_fbm<T: Real>(grid: TimeGrid<T>, hurst: Hurst<T>, dim: usize, seed: u64) -> Result<Path<T>> {
    let sampler = FbmSampler::new(grid, hurst)?;
    let mut r = rng::stream(seed, rng::tag::FBM, 0, 0);
    Ok(sampler.sample(&mut r, dim))
}
