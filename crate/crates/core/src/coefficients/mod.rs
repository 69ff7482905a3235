//! Coefficient sets `(b, σ, f, g)`, empirical measures, Wasserstein
//! distances, moduli of continuity and assumption probes.
//!
//! Matrices are row-major; `σ` is `n × n` and `g` is `m × m`.

mod families;
mod measure;
mod modulus;
mod probes;

pub use families::{builtin_family, FamilyKind, LinearFamily, LinearParams};
pub use measure::{wasserstein, wasserstein2, EmpiricalMeasure};
pub use modulus::{ModulusFamily, ModulusSpec};
pub use probes::{probe_growth_g, probe_h1, probe_h2, AssumptionParams, ProbeReport, ProbeSampler};

use crate::Real;

/// The quadruple `(b, σ, f, g)` of the slow–fast system.
///
/// Implementations must be pure: the simulators call them concurrently.
pub trait Coefficients<T: Real>: Send + Sync {
    /// `n`.
    fn slow_dim(&self) -> usize;
    /// `m`.
    fn fast_dim(&self) -> usize;

    /// `b(t, x, μ, y)` into `out` (length `n`).
    fn drift(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]);
    /// `σ(t, μ)` into `out` (length `n²`).
    fn slow_diffusion(&self, t: T, mu: &EmpiricalMeasure<T>, out: &mut [T]);
    /// `f(t, x, μ, y)` into `out` (length `m`).
    fn fast_drift(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]);
    /// `g(t, x, μ, y)` into `out` (length `m²`).
    fn fast_diffusion(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]);

    /// True when every coefficient sees `μ` only through its mean.
    fn mean_field_only(&self) -> bool {
        false
    }

    /// Closed-form averaged drift, when one is known.
    fn closed_form_bbar(&self) -> Option<&dyn AveragedDrift<T>> {
        None
    }
}

/// Averaged drift `b̄(t, x, μ) = ∫ b(t, x, μ, y) ν^{t,x,μ}(dy)`.
pub trait AveragedDrift<T: Real>: Send + Sync {
    fn eval(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]);

    /// `∂_x b̄` into `out` (`n × n`, row-major); central differences by default.
    fn jacobian_x(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        let n = x.len();
        let mut xp = x.to_vec();
        let mut fp = vec![T::zero(); n];
        let mut fm = vec![T::zero(); n];
        for j in 0..n {
            let h = T::epsilon().cbrt() * (T::one() + x[j].abs());
            xp[j] = x[j] + h;
            self.eval(t, &xp, mu, &mut fp);
            xp[j] = x[j] - h;
            self.eval(t, &xp, mu, &mut fm);
            xp[j] = x[j];
            for i in 0..n {
                out[i * n + j] = (fp[i] - fm[i]) / (h + h);
            }
        }
    }
}

type VecFn<T> = Box<dyn Fn(T, &[T], &EmpiricalMeasure<T>, &[T], &mut [T]) + Send + Sync>;
type SigmaFn<T> = Box<dyn Fn(T, &EmpiricalMeasure<T>, &mut [T]) + Send + Sync>;

/// Coefficient set assembled from closures.
pub struct FnCoefficients<T: Real> {
    n: usize,
    m: usize,
    b: VecFn<T>,
    sigma: SigmaFn<T>,
    f: VecFn<T>,
    g: VecFn<T>,
    mean_field: bool,
}

impl<T: Real> FnCoefficients<T> {
    pub fn new(
        n: usize,
        m: usize,
        b: impl Fn(T, &[T], &EmpiricalMeasure<T>, &[T], &mut [T]) + Send + Sync + 'static,
        sigma: impl Fn(T, &EmpiricalMeasure<T>, &mut [T]) + Send + Sync + 'static,
        f: impl Fn(T, &[T], &EmpiricalMeasure<T>, &[T], &mut [T]) + Send + Sync + 'static,
        g: impl Fn(T, &[T], &EmpiricalMeasure<T>, &[T], &mut [T]) + Send + Sync + 'static,
    ) -> Self {
        Self { n, m, b: Box::new(b), sigma: Box::new(sigma), f: Box::new(f), g: Box::new(g), mean_field: false }
    }

    /// Declares that `μ` enters only through its mean.
    pub fn with_mean_field(mut self) -> Self {
        self.mean_field = true;
        self
    }

    /// All four coefficients identically zero.
    pub fn zero(n: usize, m: usize) -> Self {
        let z = |_: T, _: &[T], _: &EmpiricalMeasure<T>, _: &[T], out: &mut [T]| out.fill(T::zero());
        Self::new(n, m, z, |_, _, out: &mut [T]| out.fill(T::zero()), z, z).with_mean_field()
    }
}

impl<T: Real> Coefficients<T> for FnCoefficients<T> {
    fn slow_dim(&self) -> usize {
        self.n
    }
    fn fast_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]) {
        (self.b)(t, x, mu, y, out)
    }
    fn slow_diffusion(&self, t: T, mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        (self.sigma)(t, mu, out)
    }
    fn fast_drift(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]) {
        (self.f)(t, x, mu, y, out)
    }
    fn fast_diffusion(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, y: &[T], out: &mut [T]) {
        (self.g)(t, x, mu, y, out)
    }
    fn mean_field_only(&self) -> bool {
        self.mean_field
    }
}
