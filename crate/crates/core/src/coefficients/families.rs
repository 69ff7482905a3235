use serde::{Deserialize, Serialize};

use super::{AssumptionParams, AveragedDrift, Coefficients, EmpiricalMeasure, ModulusSpec};
use crate::error::{Error, Result};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    LinearMeanfield,
    OuFrozenGaussian,
    GaussianDecoupled,
}

impl FamilyKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear_meanfield" => Ok(Self::LinearMeanfield),
            "ou_frozen_gaussian" => Ok(Self::OuFrozenGaussian),
            "gaussian_decoupled" => Ok(Self::GaussianDecoupled),
            other => Err(Error::Config(format!(
                "unknown family '{other}' (expected linear_meanfield, ou_frozen_gaussian or gaussian_decoupled)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LinearMeanfield => "linear_meanfield",
            Self::OuFrozenGaussian => "ou_frozen_gaussian",
            Self::GaussianDecoupled => "gaussian_decoupled",
        }
    }

    pub fn default_params<T: Real>(self) -> LinearParams<T> {
        let l = T::lit;
        let z = T::zero();
        match self {
            Self::LinearMeanfield => LinearParams {
                dim: 1,
                a1: l(-1.0),
                a2: l(0.5),
                a3: l(1.0),
                a4: z,
                s0: l(0.5),
                s1: l(0.25),
                beta: l(1.0),
                c1: l(0.5),
                c2: l(0.25),
                gamma0: l(0.5),
            },
            Self::OuFrozenGaussian => LinearParams {
                dim: 1,
                a1: z,
                a2: z,
                a3: l(1.0),
                a4: z,
                s0: l(0.5),
                s1: z,
                beta: l(1.0),
                c1: l(-1.0),
                c2: z,
                gamma0: l(0.5),
            },
            Self::GaussianDecoupled => LinearParams {
                dim: 1,
                a1: z,
                a2: z,
                a3: z,
                a4: z,
                s0: l(1.0),
                s1: z,
                beta: l(1.0),
                c1: z,
                c2: z,
                gamma0: l(1.0),
            },
        }
    }
}

/// Constants of the linear family, `n = m = dim`:
///
/// * `b = a1 x + a2 mean(μ) + a3 y + a4`
/// * `σ = (s0 + s1 m̄(μ)) I`, `m̄` the average of the mean's components
/// * `f = -β (y - c1 x - c2 mean(μ))`
/// * `g = γ0 I`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams<T> {
    pub dim: usize,
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub a4: T,
    pub s0: T,
    pub s1: T,
    pub beta: T,
    pub c1: T,
    pub c2: T,
    pub gamma0: T,
}

/// Linear mean-field coefficient family.
///
/// The frozen equation is an OU process with stationary law
/// `N(c1 x + c2 mean(μ), γ0²/(2β) I)`, so `b̄` is available in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFamily<T> {
    kind: FamilyKind,
    p: LinearParams<T>,
}

impl<T: Real> LinearFamily<T> {
    pub fn new(kind: FamilyKind, p: LinearParams<T>) -> Result<Self> {
        if p.dim == 0 {
            return Err(Error::Config("family dimension must be positive".into()));
        }
        let all = [p.a1, p.a2, p.a3, p.a4, p.s0, p.s1, p.beta, p.c1, p.c2, p.gamma0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("family constants must be finite".into()));
        }
        Ok(Self { kind, p })
    }

    pub fn preset(kind: FamilyKind) -> Self {
        Self { kind, p: kind.default_params() }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn params(&self) -> &LinearParams<T> {
        &self.p
    }

    /// Slope matrix of `b̄` in `x`: `(a1 + a3 c1) I`.
    pub fn bbar_slope(&self) -> T {
        self.p.a1 + self.p.a3 * self.p.c1
    }

    /// Slope of `b̄` in the mean: `a2 + a3 c2`.
    pub fn bbar_mean_slope(&self) -> T {
        self.p.a2 + self.p.a3 * self.p.c2
    }

    /// Stationary variance of each frozen fast component, `γ0²/(2β)`.
    pub fn frozen_variance(&self) -> T {
        self.p.gamma0 * self.p.gamma0 / (T::lit(2.0) * self.p.beta)
    }

    fn mbar(&self, mu: &EmpiricalMeasure<T>) -> T {
        mu.mean().iter().copied().sum::<T>() / T::from_usize_exact(mu.dim())
    }

    /// Constants under which H1, H2 and the growth condition hold for this
    /// family, with dissipativity margin `eta ∈ (0, 2)`.
    ///
    /// The origin bound of H1 additionally needs `|a4|√d + |s0| + γ0 ≤ 1`,
    /// which no choice of constants can repair.
    pub fn assumption_params(&self, eta: T) -> Result<AssumptionParams<T>> {
        let p = &self.p;
        let lip = |c: &[T]| {
            let max = c.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let sq = c.iter().map(|v| *v * *v).sum::<T>();
            max.max(sq)
        };
        let b = lip(&[p.a1, p.a2, p.a3]);
        let f = lip(&[p.beta * p.c1, p.beta * p.c2, p.beta]);
        let s = lip(&[p.s1]);
        let cross = p.beta * (p.c1 * p.c1 + p.c2 * p.c2) / eta;
        let k = b.max(f).max(s).max(cross).max(T::lit(1e-12));
        let beta12 = p.beta * (T::lit(2.0) - eta);
        let c_t = (p.gamma0 * p.gamma0).max(p.gamma0.abs()).max(cross).max(T::lit(1e-12));
        AssumptionParams::new(ModulusSpec::linear(k)?, T::zero(), beta12, beta12, c_t, T::lit(2.0))
    }
}

/// The named preset with its constants replaced by `params`.
pub fn builtin_family<T: Real>(name: &str, params: Option<LinearParams<T>>) -> Result<LinearFamily<T>> {
    let kind = FamilyKind::parse(name)?;
    LinearFamily::new(kind, params.unwrap_or_else(|| kind.default_params()))
}

impl<T: Real> Coefficients<T> for LinearFamily<T> {
    fn slow_dim(&self) -> usize {
        self.p.dim
    }

    fn fast_dim(&self) -> usize {
        self.p.dim
    }

    fn drift(&self, _t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]) {
        let p = &self.p;
        for i in 0..p.dim {
            out[i] = p.a1 * x[i] + p.a2 * mu.mean()[i] + p.a3 * y[i] + p.a4;
        }
    }

    fn slow_diffusion(&self, _t: T, mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        let d = self.p.dim;
        let s = self.p.s0 + self.p.s1 * self.mbar(mu);
        out.fill(T::zero());
        for i in 0..d {
            out[i * d + i] = s;
        }
    }

    fn fast_drift(&self, _t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]) {
        let p = &self.p;
        for i in 0..p.dim {
            out[i] = -p.beta * (y[i] - p.c1 * x[i] - p.c2 * mu.mean()[i]);
        }
    }

    fn fast_diffusion(&self, _t: T, _x: &[T], _mu: &EmpiricalMeasure<T>, _y: &[T], out: &mut [T]) {
        let d = self.p.dim;
        out.fill(T::zero());
        for i in 0..d {
            out[i * d + i] = self.p.gamma0;
        }
    }

    fn mean_field_only(&self) -> bool {
        true
    }

    fn closed_form_bbar(&self) -> Option<&dyn AveragedDrift<T>> {
        Some(self)
    }
}

impl<T: Real> AveragedDrift<T> for LinearFamily<T> {
    fn eval(&self, _t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        let (sx, sm) = (self.bbar_slope(), self.bbar_mean_slope());
        for i in 0..self.p.dim {
            out[i] = sx * x[i] + sm * mu.mean()[i] + self.p.a4;
        }
    }

    fn jacobian_x(&self, _t: T, _x: &[T], _mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        let d = self.p.dim;
        out.fill(T::zero());
        for i in 0..d {
            out[i * d + i] = self.bbar_slope();
        }
    }
}
