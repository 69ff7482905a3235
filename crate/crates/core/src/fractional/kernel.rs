use super::Hurst;
use crate::error::{domain, Result};
use crate::quad::{integrate_adaptive, tanh_sinh};
use crate::Real;

/// Volterra kernel `K_H(t, s)`, zero for `t <= s`.
///
/// With `u = s + (t-s) w^{1/α}` the `(u-s)^{α-1}` singularity disappears:
/// `K_H(t,s) = C_H s^{-α} (t-s)^α / α · ∫_0^1 (s + (t-s) w^{1/α})^α dw`.
pub fn kernel_k<T: Real>(t: T, s: T, h: Hurst<T>) -> Result<T> {
    if t < T::zero() || s < T::zero() {
        return domain(format!("kernel needs non-negative times, got ({t}, {s})"));
    }
    if t <= s {
        return Ok(T::zero());
    }
    if h.is_brownian() {
        return Ok(T::one());
    }
    if s == T::zero() {
        return Ok(T::infinity());
    }
    Ok(kernel_unchecked(s, t - s, h))
}

/// `K_H(t, s)` with `d = t - s > 0` supplied without cancellation.
pub(crate) fn kernel_unchecked<T: Real>(s: T, d: T, h: Hurst<T>) -> T {
    let a = h.alpha();
    let inv_a = T::one() / a;
    let tol = T::epsilon() * T::lit(64.0);
    let inner = integrate_adaptive(|w: T| (s + d * w.powf(inv_a)).powf(a), T::zero(), T::one(), T::zero(), tol);
    h.c_h() * (d / s).powf(a) * inv_a * inner.value
}

/// `∫_0^{t∧s} K_H(t,r) K_H(s,r) dr`, which reproduces `R_H(t, s)`.
pub fn kernel_inner_product<T: Real>(t: T, s: T, h: Hurst<T>) -> Result<T> {
    if t < T::zero() || s < T::zero() {
        return domain(format!("kernel needs non-negative times, got ({t}, {s})"));
    }
    let m = t.min(s);
    if m == T::zero() {
        return Ok(T::zero());
    }
    if h.is_brownian() {
        return Ok(m);
    }
    let tol = T::epsilon().sqrt() * T::lit(1e-3);
    let r = tanh_sinh(
        |r, _, dr| {
            // `dr = m - r` keeps the gap exact for the smaller time.
            let kt = kernel_unchecked(r, if t == m { dr } else { t - r }, h);
            let ks = kernel_unchecked(r, if s == m { dr } else { s - r }, h);
            kt * ks
        },
        T::zero(),
        m,
        tol,
    );
    Ok(r.value)
}
