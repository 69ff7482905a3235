//! Discrete `K_H` and `K̇_H` on piecewise-constant densities.
//!
//! For `û` constant on cells, `(K̇_H û)(t) = C_H t^α Σ_j û_j ∫_{cell j ∩ [0,t]}
//! (t-s)^{α-1} s^{-α} ds`, and with `s = t x` each inner integral is a
//! difference of upper incomplete Beta values. `K̇_H` is stored as the
//! lower-triangular matrix of exact cell averages of these responses, so
//! `K_H û` at the nodes is its running integral with no further error.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::Hurst;
use crate::error::{Error, Result};
use crate::grid::{Density, Path, TimeGrid};
use crate::linalg::operator_norm;
use crate::quad::{tanh_sinh, GaussLegendre};
use crate::special::{beta, inc_beta_reg};
use crate::Real;

/// `∫_y^1 x^{-α}(1-x)^{α-1} dx` with `y = lower / t` and `1 - y = gap / t`.
#[inline]
fn upper<T: Real>(alpha: T, b: T, lower: T, gap: T, t: T) -> T {
    if gap <= T::zero() {
        return T::zero();
    }
    b * inc_beta_reg(alpha, T::one() - alpha, gap / t, lower / t)
}

type UnitKey = (usize, u64);

fn unit_cache() -> &'static Mutex<HashMap<UnitKey, Arc<Vec<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<UnitKey, Arc<Vec<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Row-packed lower-triangular `K̇_H` cell-average matrix on the unit grid.
fn unit_matrix(n: usize, h: Hurst<f64>) -> Arc<Vec<f64>> {
    let key = (n, h.value().to_bits());
    if let Some(m) = unit_cache().lock().expect("cache lock").get(&key) {
        return Arc::clone(m);
    }
    let m = Arc::new(build_unit_matrix(n, h));
    unit_cache().lock().expect("cache lock").entry(key).or_insert_with(|| Arc::clone(&m));
    m
}

fn build_unit_matrix(n: usize, h: Hurst<f64>) -> Vec<f64> {
    let mut a = vec![0.0; n * (n + 1) / 2];
    if h.is_brownian() {
        for k in 0..n {
            a[k * (k + 1) / 2 + k] = 1.0;
        }
        return a;
    }
    let alpha = h.alpha();
    let b = beta(alpha, 1.0 - alpha);
    let ch = h.c_h();
    let gl = GaussLegendre::<f64>::new(16);
    let tol = 1e-14;
    let mut u_at = Vec::new();
    for k in 0..n {
        let kf = k as f64;
        let row = k * (k + 1) / 2;
        // Diagonal cell: response rises like (t-k)^α from the cell's left edge.
        a[row + k] = ch * tanh_sinh(|t, dl, _| t.powf(alpha) * upper(alpha, b, kf, dl, t), kf, kf + 1.0, tol).value;
        if k == 0 {
            continue;
        }
        a[row + k - 1] = ch
            * tanh_sinh(
                |t, dl, _| t.powf(alpha) * (upper(alpha, b, kf - 1.0, 1.0 + dl, t) - upper(alpha, b, kf, dl, t)),
                kf,
                kf + 1.0,
                tol,
            )
            .value;
        if k == 1 {
            continue;
        }
        // Remaining cells are smooth in t; share U(j/t) between neighbours.
        for j in 0..k - 1 {
            a[row + j] = 0.0;
        }
        for (node, w) in gl.rule() {
            let t = kf + 0.5 + 0.5 * node;
            let ta = t.powf(alpha);
            u_at.clear();
            u_at.extend((0..k).map(|j| upper(alpha, b, j as f64, t - j as f64, t)));
            for j in 0..k - 1 {
                a[row + j] += 0.5 * w * ch * ta * (u_at[j] - u_at[j + 1]);
            }
        }
    }
    a
}

/// `K_H` and `K̇_H` on a fixed grid.
#[derive(Debug, Clone)]
pub struct KOperator<T> {
    grid: TimeGrid<T>,
    hurst: Hurst<T>,
    /// Row-packed lower triangle of the cell-average matrix.
    a: Vec<T>,
}

impl<T: Real> KOperator<T> {
    pub fn new(grid: TimeGrid<T>, hurst: Hurst<T>) -> Result<Self> {
        let h64 = Hurst::new(hurst.value().as_f64())?;
        let unit = unit_matrix(grid.steps(), h64);
        let scale = grid.dt().as_f64().powf(h64.alpha());
        let a = unit.iter().map(|v| T::lit(v * scale)).collect();
        Ok(Self { grid, hurst, a })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn hurst(&self) -> Hurst<T> {
        self.hurst
    }

    /// Entry `(k, j)`: average over cell `k` of the response to `1_{cell j}`.
    #[inline]
    pub fn entry(&self, k: usize, j: usize) -> T {
        if j > k {
            T::zero()
        } else {
            self.a[k * (k + 1) / 2 + j]
        }
    }

    fn check(&self, d: &Density<T>) -> Result<()> {
        self.grid.check_same(d.grid())
    }

    /// `K̇_H û` as cell averages.
    pub fn apply_kdot(&self, uhat: &Density<T>) -> Result<Density<T>> {
        self.check(uhat)?;
        let (n, dim) = (self.grid.steps(), uhat.dim());
        let mut out = Density::zeros(self.grid, dim);
        for k in 0..n {
            let row = &self.a[k * (k + 1) / 2..=k * (k + 1) / 2 + k];
            for i in 0..dim {
                let mut s = T::zero();
                for (j, aj) in row.iter().enumerate() {
                    s += *aj * uhat.at(j)[i];
                }
                out.at_mut(k)[i] = s;
            }
        }
        Ok(out)
    }

    /// Transpose of [`apply_kdot`](Self::apply_kdot) in the cell basis.
    pub fn apply_kdot_transpose(&self, w: &Density<T>) -> Result<Density<T>> {
        self.check(w)?;
        let (n, dim) = (self.grid.steps(), w.dim());
        let mut out = Density::zeros(self.grid, dim);
        for k in 0..n {
            let row = &self.a[k * (k + 1) / 2..=k * (k + 1) / 2 + k];
            for (j, aj) in row.iter().enumerate() {
                for i in 0..dim {
                    let v = *aj * w.at(k)[i];
                    out.at_mut(j)[i] += v;
                }
            }
        }
        Ok(out)
    }

    /// `K_H û` at the nodes.
    pub fn apply_k(&self, uhat: &Density<T>) -> Result<Path<T>> {
        Ok(self.apply_kdot(uhat)?.integrate())
    }

    /// Pointwise `(K̇_H û)(t)` for `t ∈ (0, T]`.
    pub fn kdot_at(&self, uhat: &Density<T>, t: T) -> Result<Vec<T>> {
        self.check(uhat)?;
        let dim = uhat.dim();
        if self.hurst.is_brownian() {
            return Ok(uhat.at(self.grid.cell_of(t)).to_vec());
        }
        if !(t > T::zero() && t <= self.grid.horizon()) {
            return Err(Error::Domain(format!("kdot_at needs t in (0, T], got {t}")));
        }
        let alpha = self.hurst.alpha();
        let b = beta(alpha, T::one() - alpha);
        let pref = self.hurst.c_h() * t.powf(alpha);
        let mut out = vec![T::zero(); dim];
        let mut j = 0;
        while j < self.grid.steps() && self.grid.node(j) < t {
            let lo = self.grid.node(j);
            let hi = self.grid.node(j + 1).min(t);
            let w = upper(alpha, b, lo, t - lo, t) - upper(alpha, b, hi, t - hi, t);
            for i in 0..dim {
                out[i] += pref * w * uhat.at(j)[i];
            }
            j += 1;
        }
        Ok(out)
    }

    /// Spectral norm of `K̇_H` as an operator on cell densities in `L²`.
    pub fn l2_bound(&self) -> T {
        let n = self.grid.steps();
        let mut dense = vec![T::zero(); n * n];
        for k in 0..n {
            for j in 0..=k {
                dense[k * n + j] = self.entry(k, j);
            }
        }
        operator_norm(n, n, &dense)
    }
}
