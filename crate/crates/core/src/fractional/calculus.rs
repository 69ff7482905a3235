//! Riemann–Liouville integrals and Marchaud-form derivatives on a uniform
//! grid, by product integration against the piecewise-linear interpolant.

use crate::error::{domain, Result};
use crate::grid::Path;
use crate::special::gamma;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `I_{0+}`, `D_{0+}`.
    Left,
    /// `I_{T-}`, `D_{T-}`.
    Right,
}

fn check_order<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return domain(format!("fractional order must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Applies a left-sided scalar kernel per component, reflecting in time for
/// the right-sided operator.
fn per_component<T: Real>(f: &Path<T>, side: Side, op: impl Fn(&[T]) -> Vec<T>) -> Path<T> {
    let n1 = f.len();
    let mut out = Path::zeros(*f.grid(), f.dim());
    for i in 0..f.dim() {
        let mut col: Vec<T> = (0..n1).map(|k| f.at(k)[i]).collect();
        if side == Side::Right {
            col.reverse();
        }
        let mut res = op(&col);
        if side == Side::Right {
            res.reverse();
        }
        for (k, v) in res.into_iter().enumerate() {
            out.at_mut(k)[i] = v;
        }
    }
    out
}

/// `I^α f` at every node; exact for piecewise-linear `f`.
pub fn frac_integral<T: Real>(f: &Path<T>, alpha: T, side: Side) -> Result<Path<T>> {
    check_order(alpha)?;
    let h = f.grid().dt();
    let scale = h.powf(alpha) / gamma(alpha + T::lit(2.0));
    let p = alpha + T::one();
    let pw = |m: usize| T::from_usize_exact(m).powf(p);
    Ok(per_component(f, side, |v| {
        let n = v.len() - 1;
        let mut out = vec![T::zero(); n + 1];
        for k in 1..=n {
            let kf = T::from_usize_exact(k);
            let mut s = (pw(k - 1) - (kf - T::one() - alpha) * kf.powf(alpha)) * v[0] + v[k];
            for j in 1..k {
                let m = k - j;
                s += (pw(m + 1) - T::lit(2.0) * pw(m) + pw(m - 1)) * v[j];
            }
            out[k] = scale * s;
        }
        out
    }))
}

/// `D^α f` at every node via the boundary term plus the singular integral.
///
/// At the singular endpoint the value is `0` when `f` vanishes there and
/// signed infinity otherwise.
pub fn frac_derivative<T: Real>(f: &Path<T>, alpha: T, side: Side) -> Result<Path<T>> {
    check_order(alpha)?;
    let h = f.grid().dt();
    let g1 = gamma(T::one() - alpha);
    let one_m = T::one() - alpha;
    Ok(per_component(f, side, |v| {
        let n = v.len() - 1;
        let mut out = vec![T::zero(); n + 1];
        out[0] = if v[0] == T::zero() { T::zero() } else { v[0].signum() * T::infinity() };
        for k in 1..=n {
            let xk = T::from_usize_exact(k) * h;
            let mut s = T::zero();
            for j in 0..k {
                let d = v[j + 1] - v[j];
                let c1 = d / h;
                let m = k - j - 1;
                let a = T::from_usize_exact(m) * h;
                let b = a + h;
                let mut term = c1 * (b.powf(one_m) - a.powf(one_m)) / one_m;
                if m > 0 {
                    let c0 = v[k] - v[j + 1] - d * T::from_usize_exact(m);
                    term += c0 * (a.powf(-alpha) - b.powf(-alpha)) / alpha;
                }
                s += term;
            }
            out[k] = (v[k] / xk.powf(alpha) + alpha * s) / g1;
        }
        out
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    #[test]
    fn integral_of_constant_and_zero() {
        let g = TimeGrid::new(1.5f64, 60).unwrap();
        let alpha = 0.3;
        let one = Path::from_fn(g, |_| 1.0);
        let r = frac_integral(&one, alpha, Side::Left).unwrap();
        for k in 0..=60 {
            let x = g.node(k);
            assert!((r.at(k)[0] - x.powf(alpha) / gamma(alpha + 1.0)).abs() < 1e-12);
        }
        let r = frac_integral(&one, alpha, Side::Right).unwrap();
        for k in 0..=60 {
            let x = 1.5 - g.node(k);
            assert!((r.at(k)[0] - x.powf(alpha) / gamma(alpha + 1.0)).abs() < 1e-12);
        }
        let zero = Path::zeros(g, 2);
        assert!(frac_integral(&zero, alpha, Side::Left).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(frac_derivative(&zero, alpha, Side::Right).unwrap().values().iter().all(|v| *v == 0.0));
        assert!(frac_integral(&zero, 1.0, Side::Left).is_err());
        assert!(frac_derivative(&zero, 0.0, Side::Left).is_err());
    }

    #[test]
    fn integral_exact_for_linear() {
        // I^α x = x^{1+α} / Γ(2+α)
        let g = TimeGrid::new(1.0f64, 40).unwrap();
        let f = Path::from_fn(g, |x| x);
        let alpha = 0.6;
        let r = frac_integral(&f, alpha, Side::Left).unwrap();
        for k in 0..=40 {
            let x = g.node(k);
            assert!((r.at(k)[0] - x.powf(1.0 + alpha) / gamma(2.0 + alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_exact_for_linear() {
        // D^α (c + x) = c x^{-α}/Γ(1-α) + x^{1-α}/Γ(2-α)
        let g = TimeGrid::new(1.0f64, 25).unwrap();
        let alpha = 0.35;
        let f = Path::from_fn(g, |x| 2.0 + x);
        let r = frac_derivative(&f, alpha, Side::Left).unwrap();
        assert_eq!(r.at(0)[0], f64::INFINITY);
        for k in 1..=25 {
            let x = g.node(k);
            let exact = 2.0 * x.powf(-alpha) / gamma(1.0 - alpha) + x.powf(1.0 - alpha) / gamma(2.0 - alpha);
            assert!((r.at(k)[0] - exact).abs() < 1e-11 * exact.abs().max(1.0), "k={k} {} {exact}", r.at(k)[0]);
        }
    }

    #[test]
    fn inversion_on_smooth_functions() {
        // f vanishes at both ends so neither side sees a boundary singularity.
        let err = |n: usize, alpha: f64, side: Side| {
            let g = TimeGrid::new(1.0f64, n).unwrap();
            let f = Path::from_fn(g, |x| x * (1.0 - x) * (2.0 * x).exp());
            let back = frac_derivative(&frac_integral(&f, alpha, side).unwrap(), alpha, side).unwrap();
            (1..n).map(|k| (back.at(k)[0] - f.at(k)[0]).abs()).fold(0.0, f64::max)
        };
        for &alpha in &[0.1, 0.25, 0.4] {
            for side in [Side::Left, Side::Right] {
                let (e1, e2) = (err(200, alpha, side), err(400, alpha, side));
                assert!(e2 < 1.0 / 400.0, "alpha={alpha} {side:?}: {e2}");
                assert!(e2 < 0.6 * e1, "alpha={alpha} {side:?}: {e1} -> {e2}");
            }
        }
    }

    fn trapezoid(v: &[f64], h: f64) -> f64 {
        let n = v.len() - 1;
        h * (0.5 * (v[0] + v[n]) + v[1..n].iter().sum::<f64>())
    }

    #[test]
    fn integration_by_parts() {
        let n = 1000;
        let g = TimeGrid::new(1.0f64, n).unwrap();
        let f = Path::from_fn(g, |x| x * x * (1.0 + x));
        let gg = Path::from_fn(g, |x| (1.0 - x).powi(2) * (2.0 + x.cos()));
        let alpha = 0.3;
        let df = frac_derivative(&f, alpha, Side::Left).unwrap();
        let dg = frac_derivative(&gg, alpha, Side::Right).unwrap();
        let lhs: Vec<f64> = (0..=n).map(|k| df.at(k)[0] * gg.at(k)[0]).collect();
        let rhs: Vec<f64> = (0..=n).map(|k| f.at(k)[0] * dg.at(k)[0]).collect();
        assert!((trapezoid(&lhs, g.dt()) - trapezoid(&rhs, g.dt())).abs() < 1e-6);
    }

    #[test]
    fn power_function_derivative() {
        // D^{1/2} x^{1/2} = Γ(3/2); checked away from the origin where the
        // interpolant of the square root is coarse.
        let n = 1024;
        let g = TimeGrid::new(1.0f64, n).unwrap();
        let f = Path::from_fn(g, |x| x.sqrt());
        let d = frac_derivative(&f, 0.5, Side::Left).unwrap();
        let target = gamma(1.5f64);
        let err = (n / 4..=n).map(|k| (d.at(k)[0] - target).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
