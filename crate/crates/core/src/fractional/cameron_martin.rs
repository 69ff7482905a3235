use super::Hurst;
use crate::error::{Error, Result};
use crate::grid::{Density, TimeGrid};
use crate::Real;

/// Cameron–Martin element `h = (K_H û, ∫ v̂)`, held through its densities.
#[derive(Debug, Clone, PartialEq)]
pub struct CMControl<T> {
    pub uhat: Density<T>,
    pub vhat: Density<T>,
}

impl<T: Real> CMControl<T> {
    pub fn new(uhat: Density<T>, vhat: Density<T>) -> Result<Self> {
        uhat.grid().check_same(vhat.grid())?;
        Ok(Self { uhat, vhat })
    }

    pub fn zero(grid: TimeGrid<T>, n: usize, m: usize) -> Self {
        Self { uhat: Density::zeros(grid, n), vhat: Density::zeros(grid, m) }
    }

    /// Control acting only in the fBm direction.
    pub fn slow(uhat: Density<T>, m: usize) -> Self {
        let vhat = Density::zeros(*uhat.grid(), m);
        Self { uhat, vhat }
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        self.uhat.grid()
    }

    /// `½ ‖h‖²_H`.
    pub fn energy(&self) -> T {
        cm_norm(self) * T::lit(0.5)
    }

    /// Membership in `S_M = {½‖h‖² ≤ M}`.
    pub fn in_ball(&self, m: T) -> bool {
        self.energy() <= m
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { uhat: self.uhat.scaled(c), vhat: self.vhat.scaled(c) }
    }
}

/// `‖h‖²_H = ∫_0^T (|û_s|² + |v̂_s|²) ds`.
pub fn cm_norm<T: Real>(h: &CMControl<T>) -> T {
    h.uhat.l2_norm_sq() + h.vhat.l2_norm_sq()
}

/// `H(2H-1) ∫∫ |t-s|^{2H-2} ⟨f(s), g(t)⟩ ds dt` for cell densities.
///
/// The weight is integrated exactly per pair of cells, giving the fractional
/// Gaussian noise autocovariance `½(|m+1|^{2H} + |m-1|^{2H} - 2|m|^{2H}) Δt^{2H}`
/// at lag `m`. At `H = 1/2` this is the `L²` inner product.
pub fn cm_inner_double<T: Real>(f: &Density<T>, g: &Density<T>, h: Hurst<T>) -> Result<T> {
    f.grid().check_same(g.grid())?;
    if f.dim() != g.dim() {
        return Err(Error::Dimension(format!("dimension mismatch: {} vs {}", f.dim(), g.dim())));
    }
    let n = f.cells();
    let two_h = T::lit(2.0) * h.value();
    let rho: Vec<T> = (0..n)
        .map(|m| {
            let mf = T::from_usize_exact(m);
            ((mf + T::one()).powf(two_h) + (mf - T::one()).abs().powf(two_h) - T::lit(2.0) * mf.powf(two_h)) * T::lit(0.5)
        })
        .collect();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let lag = i.abs_diff(j);
            let ip: T = f.at(i).iter().zip(g.at(j)).map(|(a, b)| *a * *b).sum();
            s += rho[lag] * ip;
        }
    }
    Ok(s * f.grid().dt().powf(two_h))
}

#[cfg(test)]
mod tests {
    use super::super::covariance_r;
    use super::*;

    #[test]
    fn norm_examples() {
        let g = TimeGrid::new(1.0f64, 10).unwrap();
        let h = CMControl::new(Density::constant(g, &[1.0]), Density::zeros(g, 1)).unwrap();
        assert!((cm_norm(&h) - 1.0).abs() < 1e-15);
        assert!((h.energy() - 0.5).abs() < 1e-15);
        assert!(h.in_ball(0.5) && !h.in_ball(0.49));
        assert_eq!(cm_norm(&CMControl::zero(g, 2, 3)), 0.0);
        assert!((h.scaled(3.0).energy() - 9.0 * h.energy()).abs() < 1e-14);
    }

    #[test]
    fn double_integral_reproduces_covariance_on_indicators() {
        // Indicators of [0, t] and [0, s] pair to R_H(t, s).
        let g = TimeGrid::new(1.0f64, 20).unwrap();
        let h = Hurst::new(0.7).unwrap();
        let ind = |k: usize| Density::from_fn(g, move |x| if x < g.node(k) { 1.0 } else { 0.0 });
        for &(a, b) in &[(20, 20), (20, 12), (5, 17), (3, 3)] {
            let v = cm_inner_double(&ind(a), &ind(b), h).unwrap();
            let r = covariance_r(g.node(a), g.node(b), h).unwrap();
            assert!((v - r).abs() < 1e-13, "({a},{b}) {v} vs {r}");
        }
    }

    #[test]
    fn double_integral_constant_and_bound() {
        let g = TimeGrid::new(2.0f64, 40).unwrap();
        let h = Hurst::new(0.75).unwrap();
        let one = Density::constant(g, &[1.0]);
        let v = cm_inner_double(&one, &one, h).unwrap();
        assert!((v - 2f64.powf(1.5)).abs() < 1e-12);
        let f = Density::from_fn(g, |t| (3.0 * t).sin() + 0.2);
        let v = cm_inner_double(&f, &f, h).unwrap();
        assert!(v <= 2.0 * 0.75 * 2f64.powf(0.5) * f.l2_norm_sq());
        assert_eq!(cm_inner_double(&Density::zeros(g, 1), &f, h).unwrap(), 0.0);
    }
}
