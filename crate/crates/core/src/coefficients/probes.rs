//! Randomised falsification probes for H1, H2 and the growth condition on
//! `g`. A pass is evidence on the sampled region, not a proof.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{wasserstein2, Coefficients, EmpiricalMeasure, ModulusSpec};
use crate::error::{domain, Result};
use crate::linalg::operator_norm;
use crate::rng::{self, StreamRng};
use crate::Real;

/// Constants of H1/H2 and the growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionParams<T> {
    /// Envelope `K(u) = 1 + k_slope · u`, so `K(0) = 1`.
    pub k_slope: T,
    pub modulus: ModulusSpec<T>,
    pub beta1: T,
    pub beta2: T,
    pub c_t: T,
    pub theta: T,
}

impl<T: Real> AssumptionParams<T> {
    pub fn new(modulus: ModulusSpec<T>, k_slope: T, beta1: T, beta2: T, c_t: T, theta: T) -> Result<Self> {
        if !(k_slope >= T::zero()) {
            return domain(format!("envelope slope must be non-negative, got {k_slope}"));
        }
        if !(beta1 > T::zero() && beta2 > T::zero()) {
            return domain(format!("dissipativity rates must be positive, got ({beta1}, {beta2})"));
        }
        if !(c_t > T::zero()) {
            return domain(format!("growth constant must be positive, got {c_t}"));
        }
        if !(theta >= T::lit(2.0)) {
            return domain(format!("moment order must be at least 2, got {theta}"));
        }
        Ok(Self { k_slope, modulus, beta1, beta2, c_t, theta })
    }

    #[inline]
    pub fn envelope(&self, u: T) -> T {
        T::one() + self.k_slope * u
    }
}

/// Heavy-tailed random arguments `(t, x, μ, y)`.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSampler<T> {
    pub seed: u64,
    pub horizon: T,
    pub scale: T,
    /// Probability of a Cauchy draw instead of a Gaussian one.
    pub heavy_fraction: T,
    /// Atoms per random empirical measure.
    pub atoms: usize,
}

impl<T: Real> ProbeSampler<T> {
    pub fn new(seed: u64) -> Self {
        Self { seed, horizon: T::one(), scale: T::lit(3.0), heavy_fraction: T::lit(0.2), atoms: 4 }
    }

    fn scalar(&self, r: &mut StreamRng) -> T {
        if T::sample_uniform(r) < self.heavy_fraction {
            let u = T::sample_uniform(r);
            self.scale * (T::PI() * (u - T::lit(0.5))).tan()
        } else {
            self.scale * T::sample_normal(r)
        }
    }

    fn vector(&self, r: &mut StreamRng, d: usize) -> Vec<T> {
        (0..d).map(|_| self.scalar(r)).collect()
    }

    fn time(&self, r: &mut StreamRng) -> T {
        self.horizon * T::sample_uniform(r)
    }

    fn measure(&self, r: &mut StreamRng, d: usize) -> EmpiricalMeasure<T> {
        let k = if r.random::<bool>() { 1 } else { self.atoms.max(1) };
        EmpiricalMeasure::new(d, self.vector(r, k * d)).expect("valid probe measure")
    }

    /// Second measure with the same atom count, for multivariate `W₂`.
    fn measure_like(&self, r: &mut StreamRng, like: &EmpiricalMeasure<T>) -> EmpiricalMeasure<T> {
        EmpiricalMeasure::new(like.dim(), self.vector(r, like.atoms().len())).expect("valid probe measure")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub assumption: String,
    pub trials: usize,
    /// Largest `observed / allowed` over all probed inequalities.
    pub worst_ratio: f64,
    /// Smallest `allowed - observed`.
    pub worst_margin: f64,
    pub pass: bool,
    /// False when no trial was run.
    pub evidence: bool,
}

impl ProbeReport {
    fn vacuous(name: &str) -> Self {
        Self { assumption: name.into(), trials: 0, worst_ratio: 0.0, worst_margin: f64::INFINITY, pass: true, evidence: false }
    }
}

#[derive(Clone, Copy)]
struct Tally {
    ratio: f64,
    margin: f64,
}

impl Tally {
    const EMPTY: Tally = Tally { ratio: f64::NEG_INFINITY, margin: f64::INFINITY };

    fn record<T: Real>(&mut self, lhs: T, rhs: T) {
        let (l, r) = (lhs.as_f64(), rhs.as_f64());
        // Relative slack absorbs rounding in the two evaluations.
        let slack = 1e-9 * (l.abs() + r.abs()) + 1e-300;
        let ratio = if l <= slack {
            0.0
        } else if r > 0.0 {
            l / (r + slack)
        } else {
            f64::INFINITY
        };
        self.ratio = self.ratio.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        self.margin = self.margin.min(r - l);
    }

    fn merge(a: Tally, b: Tally) -> Tally {
        Tally { ratio: a.ratio.max(b.ratio), margin: a.margin.min(b.margin) }
    }
}

fn finish(name: &str, trials: usize, t: Tally) -> ProbeReport {
    let worst = t.ratio.max(0.0);
    ProbeReport { assumption: name.into(), trials, worst_ratio: worst, worst_margin: t.margin, pass: worst <= 1.0, evidence: true }
}

fn run(trials: usize, seed: u64, f: impl Fn(&mut StreamRng, &mut Tally) + Sync) -> Tally {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, rng::tag::PROBE, i as u64, 0);
            let mut t = Tally::EMPTY;
            f(&mut r, &mut t);
            t
        })
        .reduce(|| Tally::EMPTY, Tally::merge)
}

fn vnorm<T: Real>(v: &[T]) -> T {
    v.iter().map(|a| *a * *a).sum::<T>().sqrt()
}

fn vdiff<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// H1 for `p ∈ {1, 2}`: the four increment bounds and the origin bound.
pub fn probe_h1<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    p: &AssumptionParams<T>,
    sampler: &ProbeSampler<T>,
    trials: usize,
) -> ProbeReport {
    const NAME: &str = "H1";
    if trials == 0 {
        return ProbeReport::vacuous(NAME);
    }
    let (n, m) = (c.slow_dim(), c.fast_dim());
    let tally = run(trials, sampler.seed, |r, tally| {
        let (t1, t2) = (sampler.time(r), sampler.time(r));
        let (x1, x2) = (sampler.vector(r, n), sampler.vector(r, n));
        let (y1, y2) = (sampler.vector(r, m), sampler.vector(r, m));
        let mu1 = sampler.measure(r, n);
        let mu2 = sampler.measure_like(r, &mu1);
        let w = wasserstein2(&mu1, &mu2).expect("matched probe measures");
        let (dx, dy, dt) = (vnorm(&vdiff(&x1, &x2)), vnorm(&vdiff(&y1, &y2)), (t1 - t2).abs());

        let mut vb = (vec![T::zero(); n], vec![T::zero(); n]);
        c.drift(t1, &x1, &mu1, &y1, &mut vb.0);
        c.drift(t2, &x2, &mu2, &y2, &mut vb.1);
        let mut vf = (vec![T::zero(); m], vec![T::zero(); m]);
        c.fast_drift(t1, &x1, &mu1, &y1, &mut vf.0);
        c.fast_drift(t2, &x2, &mu2, &y2, &mut vf.1);
        let mut vg = (vec![T::zero(); m * m], vec![T::zero(); m * m]);
        c.fast_diffusion(t1, &x1, &mu1, &y1, &mut vg.0);
        c.fast_diffusion(t2, &x2, &mu2, &y2, &mut vg.1);
        let mut vs = (vec![T::zero(); n * n], vec![T::zero(); n * n]);
        c.slow_diffusion(t1, &mu1, &mut vs.0);
        c.slow_diffusion(t1, &mu2, &mut vs.1);

        let db = vnorm(&vdiff(&vb.0, &vb.1));
        let df = vnorm(&vdiff(&vf.0, &vf.1));
        let dg = operator_norm(m, m, &vdiff(&vg.0, &vg.1));
        let ds = operator_norm(n, n, &vdiff(&vs.0, &vs.1));

        // Origin bound at t1.
        let zn = vec![T::zero(); n];
        let zm = vec![T::zero(); m];
        let d0 = EmpiricalMeasure::dirac(&zn);
        let mut ob = vec![T::zero(); n];
        let mut of = vec![T::zero(); m];
        let mut og = vec![T::zero(); m * m];
        let mut os = vec![T::zero(); n * n];
        c.drift(t1, &zn, &d0, &zm, &mut ob);
        c.fast_drift(t1, &zn, &d0, &zm, &mut of);
        c.fast_diffusion(t1, &zn, &d0, &zm, &mut og);
        c.slow_diffusion(t1, &d0, &mut os);
        let origin = [vnorm(&ob), operator_norm(n, n, &os), vnorm(&of), operator_norm(m, m, &og)];

        for pw in [T::one(), T::lit(2.0)] {
            let k = p.envelope(dt.powf(pw));
            let arg = dx.powf(pw) + dy.powf(pw) + w.powf(pw);
            let rhs = k * p.modulus.eval_unchecked(arg);
            tally.record(db.powf(pw), rhs);
            tally.record(df.powf(pw), rhs);
            tally.record(dg.powf(pw), rhs);
            tally.record(ds.powf(pw), p.envelope(t1.powf(pw)) * p.modulus.eval_unchecked(w.powf(pw)));
            let lhs: T = origin.iter().map(|v| v.powf(pw)).sum();
            tally.record(lhs, p.envelope(t1.powf(pw)));
        }
    });
    finish(NAME, trials, tally)
}

/// Both H2 displays: the two-point contraction and one-point dissipativity.
pub fn probe_h2<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    p: &AssumptionParams<T>,
    sampler: &ProbeSampler<T>,
    trials: usize,
) -> ProbeReport {
    const NAME: &str = "H2";
    if trials == 0 {
        return ProbeReport::vacuous(NAME);
    }
    let (n, m) = (c.slow_dim(), c.fast_dim());
    let two = T::lit(2.0);
    let tally = run(trials, sampler.seed, |r, tally| {
        let (t1, t2) = (sampler.time(r), sampler.time(r));
        let (x1, x2) = (sampler.vector(r, n), sampler.vector(r, n));
        let (y1, y2) = (sampler.vector(r, m), sampler.vector(r, m));
        let mu1 = sampler.measure(r, n);
        let mu2 = sampler.measure_like(r, &mu1);
        let w = wasserstein2(&mu1, &mu2).expect("matched probe measures");

        let mut f1 = vec![T::zero(); m];
        let mut f2 = vec![T::zero(); m];
        let mut g1 = vec![T::zero(); m * m];
        let mut g2 = vec![T::zero(); m * m];
        c.fast_drift(t1, &x1, &mu1, &y1, &mut f1);
        c.fast_drift(t2, &x2, &mu2, &y2, &mut f2);
        c.fast_diffusion(t1, &x1, &mu1, &y1, &mut g1);
        c.fast_diffusion(t2, &x2, &mu2, &y2, &mut g2);
        let dy = vdiff(&y1, &y2);
        let dy2: T = dy.iter().map(|v| *v * *v).sum();
        let inner: T = dy.iter().zip(vdiff(&f1, &f2)).map(|(a, b)| *a * b).sum();
        let dg = operator_norm(m, m, &vdiff(&g1, &g2));
        let dx2: T = vdiff(&x1, &x2).iter().map(|v| *v * *v).sum();
        let lhs = two * inner + dg * dg + p.beta1 * dy2;
        let rhs = p.envelope((t1 - t2).powi(2)) * p.modulus.eval_unchecked(dx2 + w * w);
        tally.record(lhs, rhs);

        let y2n: T = y1.iter().map(|v| *v * *v).sum();
        let x2n: T = x1.iter().map(|v| *v * *v).sum();
        let inner1: T = y1.iter().zip(&f1).map(|(a, b)| *a * *b).sum();
        let g1n = operator_norm(m, m, &g1);
        let lhs = two * inner1 + g1n * g1n + p.beta2 * y2n;
        let rhs = p.c_t * (T::one() + x2n + mu1.second_moment());
        tally.record(lhs, rhs);
    });
    finish(NAME, trials, tally)
}

/// `sup_y ‖g(t,x,μ,y)‖ ≤ C_T (1 + |x| + μ(|·|²)^{1/2})`, with heavy-tailed `y`.
pub fn probe_growth_g<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    p: &AssumptionParams<T>,
    sampler: &ProbeSampler<T>,
    trials: usize,
) -> ProbeReport {
    const NAME: &str = "growth_g";
    if trials == 0 {
        return ProbeReport::vacuous(NAME);
    }
    let (n, m) = (c.slow_dim(), c.fast_dim());
    let tally = run(trials, sampler.seed, |r, tally| {
        let t = sampler.time(r);
        let x = sampler.vector(r, n);
        let mu = sampler.measure(r, n);
        let rhs = p.c_t * (T::one() + vnorm(&x) + mu.second_moment().sqrt());
        let mut g = vec![T::zero(); m * m];
        // Several y per (t, x, μ) to stress the supremum.
        for _ in 0..8 {
            let y = sampler.vector(r, m);
            c.fast_diffusion(t, &x, &mu, &y, &mut g);
            tally.record(operator_norm(m, m, &g), rhs);
        }
    });
    finish(NAME, trials, tally)
}
