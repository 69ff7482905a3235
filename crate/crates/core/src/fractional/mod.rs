//! Fractional Brownian motion, fractional calculus and Cameron–Martin
//! operators.

mod calculus;
mod cameron_martin;
mod fbm;
mod kernel;
mod operator;

pub use calculus::{frac_derivative, frac_integral, Side};
pub use cameron_martin::{cm_inner_double, cm_norm, CMControl};
pub use fbm::{sample_fbm, FbmSampler};
pub use kernel::{kernel_inner_product, kernel_k};
pub use operator::KOperator;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::special::beta;
use crate::Real;

/// Hurst index `H ∈ [1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hurst<T>(T);

impl<T: Real> Hurst<T> {
    pub fn new(h: T) -> Result<Self> {
        if !(h >= T::lit(0.5) && h < T::one()) {
            return domain(format!("Hurst index must lie in [1/2, 1), got {h}"));
        }
        Ok(Self(h))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// `α = H - 1/2`.
    #[inline]
    pub fn alpha(self) -> T {
        self.0 - T::lit(0.5)
    }

    #[inline]
    pub fn is_brownian(self) -> bool {
        self.0 == T::lit(0.5)
    }

    /// Kernel normaliser `C_H = sqrt(H(2H-1) / B(2-2H, H-1/2))`; `1` at `H = 1/2`.
    pub fn c_h(self) -> T {
        if self.is_brownian() {
            return T::one();
        }
        let h = self.0;
        let two = T::lit(2.0);
        (h * (two * h - T::one()) / beta(two - two * h, h - T::lit(0.5))).sqrt()
    }
}

/// `R_H(t, s) = ½ (t^{2H} + s^{2H} - |t-s|^{2H})`.
pub fn covariance_r<T: Real>(t: T, s: T, h: Hurst<T>) -> Result<T> {
    if t < T::zero() || s < T::zero() {
        return domain(format!("covariance needs non-negative times, got ({t}, {s})"));
    }
    Ok(cov_unchecked(t, s, h.value()))
}

#[inline]
pub(crate) fn cov_unchecked<T: Real>(t: T, s: T, h: T) -> T {
    let e = T::lit(2.0) * h;
    if t == s {
        return t.powf(e);
    }
    (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)) * T::lit(0.5)
}
