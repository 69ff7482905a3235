//! Uniform time lattice, node-sampled paths and cell-wise densities.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::Real;

/// Uniform partition `t_k = k T / N` of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    horizon: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return domain(format!("time horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return domain("grid needs at least one step");
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.horizon
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_exact(self.steps)
    }

    /// Node `t_k`; `t_N` is exactly the horizon.
    #[inline]
    pub fn node(&self, k: usize) -> T {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * T::from_usize_exact(k) / T::from_usize_exact(self.steps)
        }
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Midpoint of cell `[t_k, t_{k+1}]`.
    #[inline]
    pub fn midpoint(&self, k: usize) -> T {
        (self.node(k) + self.node(k + 1)) * T::lit(0.5)
    }

    /// Index of the cell containing `t`, clamped to `[0, N-1]`.
    pub fn cell_of(&self, t: T) -> usize {
        let k = (t / self.dt()).floor();
        if k <= T::zero() {
            0
        } else {
            k.to_usize().unwrap_or(usize::MAX).min(self.steps - 1)
        }
    }

    /// Same lattice at a different precision.
    pub fn cast<U: Real>(&self) -> TimeGrid<U> {
        TimeGrid { horizon: U::lit(self.horizon.as_f64()), steps: self.steps }
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.steps != other.steps || self.horizon != other.horizon {
            return Err(Error::Dimension(format!(
                "grid mismatch: (T={}, N={}) vs (T={}, N={})",
                self.horizon, self.steps, other.horizon, other.steps
            )));
        }
        Ok(())
    }
}

/// A `dim`-vector per grid node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> Path<T> {
    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        Self { grid, dim, values: vec![T::zero(); (grid.steps + 1) * dim] }
    }

    pub fn constant(grid: TimeGrid<T>, value: &[T]) -> Self {
        let mut values = Vec::with_capacity((grid.steps + 1) * value.len());
        for _ in 0..=grid.steps {
            values.extend_from_slice(value);
        }
        Self { grid, dim: value.len(), values }
    }

    pub fn from_values(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() != (grid.steps + 1) * dim {
            return Err(Error::Dimension(format!(
                "path needs {} values for dim {dim}, got {}",
                (grid.steps + 1) * dim,
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    /// Scalar path `k -> f(t_k)`.
    pub fn from_fn(grid: TimeGrid<T>, mut f: impl FnMut(T) -> T) -> Self {
        let values = (0..=grid.steps).map(|k| f(grid.node(k))).collect();
        Self { grid, dim: 1, values }
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
    pub fn len(&self) -> usize {
        self.grid.steps + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Component `i` as a scalar path.
    pub fn component(&self, i: usize) -> Path<T> {
        let values = (0..self.len()).map(|k| self.at(k)[i]).collect();
        Path { grid: self.grid, dim: 1, values }
    }

    /// `max_k |x_k - y_k|` with the Euclidean norm per node.
    pub fn sup_distance(&self, other: &Self) -> T {
        debug_assert_eq!(self.values.len(), other.values.len());
        (0..self.len())
            .map(|k| {
                self.at(k)
                    .iter()
                    .zip(other.at(k))
                    .map(|(a, b)| (*a - *b) * (*a - *b))
                    .sum::<T>()
                    .sqrt()
            })
            .fold(T::zero(), T::max)
    }

    /// Trapezoidal `∫_0^T |x_t|² dt`.
    pub fn l2_norm_sq(&self) -> T {
        let dt = self.grid.dt();
        let sq = |k: usize| self.at(k).iter().map(|v| *v * *v).sum::<T>();
        let n = self.grid.steps;
        let mut s = (sq(0) + sq(n)) * T::lit(0.5);
        for k in 1..n {
            s += sq(k);
        }
        s * dt
    }

    /// Forward differences `(x_{k+1} - x_k) / Δt` as a cell density.
    pub fn difference_quotient(&self) -> Density<T> {
        let dt = self.grid.dt();
        let mut out = Density::zeros(self.grid, self.dim);
        for k in 0..self.grid.steps {
            for i in 0..self.dim {
                out.at_mut(k)[i] = (self.at(k + 1)[i] - self.at(k)[i]) / dt;
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> Path<U> {
        Path {
            grid: self.grid.cast(),
            dim: self.dim,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// A `dim`-vector per grid cell: a piecewise-constant L² density.
#[derive(Debug, Clone, PartialEq)]
pub struct Density<T> {
    grid: TimeGrid<T>,
    dim: usize,
    values: Vec<T>,
}

impl<T: Real> Density<T> {
    pub fn zeros(grid: TimeGrid<T>, dim: usize) -> Self {
        Self { grid, dim, values: vec![T::zero(); grid.steps * dim] }
    }

    pub fn constant(grid: TimeGrid<T>, value: &[T]) -> Self {
        let mut values = Vec::with_capacity(grid.steps * value.len());
        for _ in 0..grid.steps {
            values.extend_from_slice(value);
        }
        Self { grid, dim: value.len(), values }
    }

    pub fn from_values(grid: TimeGrid<T>, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() != grid.steps * dim {
            return Err(Error::Dimension(format!(
                "density needs {} values for dim {dim}, got {}",
                grid.steps * dim,
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    /// Scalar density sampled at cell midpoints.
    pub fn from_fn(grid: TimeGrid<T>, mut f: impl FnMut(T) -> T) -> Self {
        let values = (0..grid.steps).map(|k| f(grid.midpoint(k))).collect();
        Self { grid, dim: 1, values }
    }

    /// Scalar density holding the exact cell averages of `f`.
    pub fn from_cell_averages(grid: TimeGrid<T>, f: impl Fn(T) -> T) -> Self {
        let gl = crate::quad::GaussLegendre::<T>::new(8);
        let dt = grid.dt();
        let values = (0..grid.steps).map(|k| gl.integrate(&f, grid.node(k), grid.node(k + 1)) / dt).collect();
        Self { grid, dim: 1, values }
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
    pub fn cells(&self) -> usize {
        self.grid.steps
    }

    #[inline]
    pub fn at(&self, k: usize) -> &[T] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize) -> &mut [T] {
        &mut self.values[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn component(&self, i: usize) -> Density<T> {
        let values = (0..self.cells()).map(|k| self.at(k)[i]).collect();
        Density { grid: self.grid, dim: 1, values }
    }

    /// `∫_0^T |f_t|² dt`, exact for piecewise-constant densities.
    pub fn l2_norm_sq(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>() * self.grid.dt()
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { grid: self.grid, dim: self.dim, values: self.values.iter().map(|v| *v * c).collect() }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * *x + b * *y).collect();
        Self { grid: self.grid, dim: self.dim, values }
    }

    /// Running integral `∫_0^{t_k} f ds` at each node.
    pub fn integrate(&self) -> Path<T> {
        let dt = self.grid.dt();
        let mut out = Path::zeros(self.grid, self.dim);
        for k in 0..self.cells() {
            for i in 0..self.dim {
                let prev = out.at(k)[i];
                out.at_mut(k + 1)[i] = prev + dt * self.at(k)[i];
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> Density<U> {
        Density {
            grid: self.grid.cast(),
            dim: self.dim,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_hit_endpoints() {
        let g = TimeGrid::new(0.3f64, 7).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(7), 0.3);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(TimeGrid::new(0.0f64, 4).is_err());
        assert!(TimeGrid::new(1.0f64, 0).is_err());
    }

    #[test]
    fn cell_lookup_clamps() {
        let g = TimeGrid::new(1.0f64, 4).unwrap();
        assert_eq!(g.cell_of(-0.1), 0);
        assert_eq!(g.cell_of(0.3), 1);
        assert_eq!(g.cell_of(1.0), 3);
    }

    #[test]
    fn density_integral_and_norm() {
        let g = TimeGrid::new(2.0f64, 8).unwrap();
        let d = Density::constant(g, &[3.0]);
        assert!((d.l2_norm_sq() - 18.0).abs() < 1e-12);
        let p = d.integrate();
        assert!((p.at(8)[0] - 6.0).abs() < 1e-12);
        let back = p.difference_quotient();
        assert!(back.values().iter().all(|v| (*v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn path_sup_distance() {
        let g = TimeGrid::new(1.0f64, 2).unwrap();
        let a = Path::from_values(g, 2, vec![0.0, 0.0, 3.0, 4.0, 0.0, 1.0]).unwrap();
        let b = Path::zeros(g, 2);
        assert_eq!(a.sup_distance(&b), 5.0);
        assert!(Path::from_values(g, 2, vec![0.0; 5]).is_err());
    }
}
