use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusFamily {
    /// `κ(u) = K u`.
    Linear,
    /// `K u log(1/u)` on `[0, γ]`, tangent continuation beyond.
    Xlog,
    /// `K u log(1/u) log log(1/u)` on `[0, γ]`, tangent continuation beyond.
    Xloglog,
}

/// Concave modulus `κ` with its linear envelope `κ(u) ≤ a (1 + u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusSpec<T> {
    pub family: ModulusFamily,
    pub k: T,
    pub gamma: T,
    /// Envelope constant `a`.
    pub envelope: T,
}

impl<T: Real> ModulusSpec<T> {
    pub fn linear(k: T) -> Result<Self> {
        if !(k > T::zero()) {
            return domain(format!("modulus constant must be positive, got {k}"));
        }
        Ok(Self { family: ModulusFamily::Linear, k, gamma: T::one(), envelope: k })
    }

    /// Requires `γ < 1/e` for `xlog` and additionally `(L-1) log L > 1`,
    /// `L = log(1/γ)`, for `xloglog`, so the splice is non-decreasing.
    pub fn new(family: ModulusFamily, k: T, gamma: T) -> Result<Self> {
        if family == ModulusFamily::Linear {
            return Self::linear(k);
        }
        if !(k > T::zero()) {
            return domain(format!("modulus constant must be positive, got {k}"));
        }
        if !(gamma > T::zero() && gamma < T::one() / T::E()) {
            return domain(format!("splice point must lie in (0, 1/e), got {gamma}"));
        }
        let mut spec = Self { family, k, gamma, envelope: T::zero() };
        let (v, d) = (spec.base(gamma), spec.left_derivative());
        if !(d > T::zero()) {
            return domain(format!("modulus slope at the splice point is {d}; choose a smaller gamma"));
        }
        spec.envelope = k * v.max(d);
        Ok(spec)
    }

    fn base(&self, u: T) -> T {
        if u == T::zero() {
            return T::zero();
        }
        let l = -u.ln();
        match self.family {
            ModulusFamily::Linear => u,
            ModulusFamily::Xlog => u * l,
            ModulusFamily::Xloglog => u * l * l.ln(),
        }
    }

    /// `κ'(γ-)` of the unscaled branch.
    fn left_derivative(&self) -> T {
        let l = -self.gamma.ln();
        match self.family {
            ModulusFamily::Linear => T::one(),
            ModulusFamily::Xlog => l - T::one(),
            ModulusFamily::Xloglog => (l - T::one()) * l.ln() - T::one(),
        }
    }

    pub fn eval(&self, u: T) -> Result<T> {
        if !(u >= T::zero()) {
            return domain(format!("modulus argument must be non-negative, got {u}"));
        }
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: T) -> T {
        let v = match self.family {
            ModulusFamily::Linear => u,
            _ if u <= self.gamma => self.base(u),
            _ => self.base(self.gamma) + self.left_derivative() * (u - self.gamma),
        };
        self.k * v
    }

    /// Evaluates the branch formula at `u = γ` from the left, for splice checks.
    pub fn left_branch_at_splice(&self) -> T {
        self.k * self.base(self.gamma)
    }
}
