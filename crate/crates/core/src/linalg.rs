//! Small dense linear algebra: jittered Cholesky, assignment, norms.

use crate::error::{Error, Result};
use crate::Real;

/// Lower Cholesky factor stored row-packed: row `i` holds `L[i][0..=i]`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    packed: Vec<T>,
    jitter: T,
}

impl<T: Real> Cholesky<T> {
    /// Factors a symmetric matrix given by `entry(i, j)` for `j <= i`.
    ///
    /// On failure the diagonal is shifted by `λ`, with `λ` escalating by ×10
    /// from `1e-14` to `max(1e-10, 100 ε)` times the largest diagonal entry.
    pub fn factor(n: usize, entry: impl Fn(usize, usize) -> T) -> Result<Self> {
        let mut a = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                a.push(entry(i, j));
            }
        }
        let max_diag = (0..n).map(|i| a[i * (i + 1) / 2 + i]).fold(T::zero(), T::max);
        let ceiling = T::lit(1e-10).max(T::epsilon() * T::lit(100.0));
        let mut rel = T::zero();
        loop {
            let lambda = rel * max_diag;
            if let Some(packed) = try_factor(n, &a, lambda) {
                return Ok(Self { n, packed, jitter: lambda });
            }
            rel = if rel == T::zero() { T::lit(1e-14) } else { rel * T::lit(10.0) };
            if rel > ceiling * T::lit(1.000001) {
                return Err(Error::Factorization(format!(
                    "matrix of order {n} not positive definite with jitter up to {:e} x max diagonal",
                    ceiling.as_f64()
                )));
            }
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    /// Diagonal shift that was needed.
    #[inline]
    pub fn jitter(&self) -> T {
        self.jitter
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let s = i * (i + 1) / 2;
        &self.packed[s..=s + i]
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[T], out: &mut [T]) {
        debug_assert_eq!(z.len(), self.n);
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = self.row(i);
            let mut s = T::zero();
            for (l, zz) in row.iter().zip(z) {
                s += *l * *zz;
            }
            *o = s;
        }
    }
}

fn try_factor<T: Real>(n: usize, a: &[T], lambda: T) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); a.len()];
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let mut s = a[ri + j];
            if i == j {
                s += lambda;
            }
            for k in 0..j {
                s -= l[ri + k] * l[rj + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[ri + i] = s.sqrt();
            } else {
                l[ri + j] = s / l[rj + j];
            }
        }
    }
    Some(l)
}

/// Minimum-cost perfect assignment on a square cost matrix (row-major).
/// Returns `perm` with row `i` assigned to column `perm[i]`.
pub fn hungarian<T: Real>(n: usize, cost: &[T]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation, 1-based with a virtual column 0.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

/// Spectral norm of a row-major `rows × cols` matrix.
pub fn operator_norm<T: Real>(rows: usize, cols: usize, a: &[T]) -> T {
    debug_assert_eq!(a.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return T::zero();
    }
    if rows == 1 || cols == 1 {
        return a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    }
    // Power iteration on AᵀA from a dense start vector.
    let mut x: Vec<T> = (0..cols).map(|j| T::one() + T::lit(0.1) * T::from_usize_exact(j)).collect();
    let mut y = vec![T::zero(); rows];
    let mut sigma = T::zero();
    for _ in 0..200 {
        let nx = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if nx == T::zero() {
            return T::zero();
        }
        x.iter_mut().for_each(|v| *v /= nx);
        for i in 0..rows {
            y[i] = (0..cols).map(|j| a[i * cols + j] * x[j]).sum();
        }
        let next = y.iter().map(|v| *v * *v).sum::<T>().sqrt();
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (0..rows).map(|i| a[i * cols + j] * y[i]).sum();
        }
        if (next - sigma).abs() <= T::epsilon() * T::lit(16.0) * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

#[inline]
pub fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

#[inline]
pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let n = 5;
        let m = |i: usize, j: usize| 1.0 / (1.0 + (i as f64 - j as f64).abs()) + if i == j { 1.0 } else { 0.0 };
        let c = Cholesky::factor(n, m).unwrap();
        assert_eq!(c.jitter(), 0.0);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| c.row(i)[k] * c.row(j)[k]).sum();
                assert!((s - m(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let r = Cholesky::factor(2, |i, j| if i == j { 1.0f64 } else { 2.0 });
        assert!(matches!(r, Err(Error::Factorization(_))));
    }

    #[test]
    fn cholesky_jitters_singular_psd() {
        // rank one: all ones
        let c = Cholesky::factor(3, |_, _| 1.0f64).unwrap();
        assert!(c.jitter() > 0.0 && c.jitter() <= 1e-10);
    }

    fn brute_force(n: usize, cost: &[f64]) -> f64 {
        fn rec(n: usize, row: usize, used: &mut Vec<bool>, cost: &[f64]) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * n + j] + rec(n, row + 1, used, cost));
                    used[j] = false;
                }
            }
            best
        }
        rec(n, 0, &mut vec![false; n], cost)
    }

    #[test]
    fn hungarian_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            for _ in 0..10 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 10.0).collect();
                let perm = hungarian(n, &cost);
                let got: f64 = (0..n).map(|i| cost[i * n + perm[i]]).sum();
                assert!((got - brute_force(n, &cost)).abs() < 1e-12);
                let mut seen = perm.clone();
                seen.sort();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn operator_norm_of_diagonal_and_rank_one() {
        let a = [3.0f64, 0.0, 0.0, -5.0];
        assert!((operator_norm(2, 2, &a) - 5.0).abs() < 1e-12);
        let b = [1.0f64; 4];
        assert!((operator_norm(2, 2, &b) - 2.0).abs() < 1e-12);
    }
}
