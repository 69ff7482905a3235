use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{AveragedDrift, Coefficients, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::rng;
use crate::Real;

/// Settings for the frozen fast equation and its ergodic averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenConfig {
    /// Euler step of the frozen equation.
    pub step: f64,
    /// Length of each chain.
    pub horizon: f64,
    /// Independent chains.
    pub chains: usize,
    /// Batches per chain for batch-means standard errors.
    pub batches: usize,
    pub seed: u64,
    /// Starting point; zero when absent.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

impl Default for FrozenConfig {
    fn default() -> Self {
        Self { step: 1e-2, horizon: 200.0, chains: 8, batches: 20, seed: 0, y0: None }
    }
}

impl FrozenConfig {
    fn steps(&self) -> Result<usize> {
        if !(self.step > 0.0) || !(self.horizon >= self.step) || self.chains == 0 || self.batches == 0 {
            return Err(Error::Config(format!(
                "frozen config needs 0 < step <= horizon and positive chains/batches, got {self:?}"
            )));
        }
        Ok((self.horizon / self.step).round() as usize)
    }

    fn start<T: Real>(&self, m: usize) -> Result<Vec<T>> {
        match &self.y0 {
            None => Ok(vec![T::zero(); m]),
            Some(v) if v.len() == m => Ok(v.iter().map(|&a| T::lit(a)).collect()),
            Some(v) => Err(Error::Dimension(format!("frozen y0 has {} entries, expected {m}", v.len()))),
        }
    }
}

/// Time average of `b(t, x, μ, Y_s)` over the frozen chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BbarEstimate<T> {
    pub value: Vec<T>,
    /// Batch-means standard error per component.
    pub std_err: Vec<T>,
    /// `Var(b) / std_err²` per component; the nominal count when the
    /// error vanishes.
    pub effective_samples: Vec<f64>,
    pub samples: usize,
}

struct FrozenStepper<'a, T, C: ?Sized> {
    c: &'a C,
    t: T,
    x: &'a [T],
    mu: &'a EmpiricalMeasure<T>,
    h: T,
    sqrt_h: T,
    fy: Vec<T>,
    gm: Vec<T>,
    z: Vec<T>,
}

impl<'a, T: Real, C: Coefficients<T> + ?Sized> FrozenStepper<'a, T, C> {
    fn new(c: &'a C, t: T, x: &'a [T], mu: &'a EmpiricalMeasure<T>, h: T) -> Self {
        let m = c.fast_dim();
        Self { c, t, x, mu, h, sqrt_h: h.sqrt(), fy: vec![T::zero(); m], gm: vec![T::zero(); m * m], z: vec![T::zero(); m] }
    }

    #[inline]
    fn step<R: rand::Rng + ?Sized>(&mut self, rng: &mut R, y: &mut [T]) {
        let m = y.len();
        for z in self.z.iter_mut() {
            *z = T::sample_normal(rng) * self.sqrt_h;
        }
        self.c.fast_drift(self.t, self.x, self.mu, y, &mut self.fy);
        self.c.fast_diffusion(self.t, self.x, self.mu, y, &mut self.gm);
        for i in 0..m {
            let mut s = self.fy[i] * self.h;
            for j in 0..m {
                s += self.gm[i * m + j] * self.z[j];
            }
            self.fy[i] = s;
        }
        for i in 0..m {
            y[i] += self.fy[i];
        }
    }
}

fn check_point<T: Real, C: Coefficients<T> + ?Sized>(c: &C, x: &[T], mu: &EmpiricalMeasure<T>) -> Result<()> {
    if x.len() != c.slow_dim() || mu.dim() != c.slow_dim() {
        return Err(Error::Dimension(format!(
            "frozen point dims (x: {}, μ: {}) do not match slow dim {}",
            x.len(),
            mu.dim(),
            c.slow_dim()
        )));
    }
    Ok(())
}

/// Euler–Maruyama path of `dY = f(t,x,μ,Y)ds + g(t,x,μ,Y)dW` with `(t, x, μ)`
/// frozen, from chain 0 of `cfg`.
pub fn frozen_simulate<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    t: T,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    cfg: &FrozenConfig,
) -> Result<Path<T>> {
    check_point(c, x, mu)?;
    let steps = cfg.steps()?;
    let m = c.fast_dim();
    let grid = TimeGrid::new(T::lit(cfg.step) * T::from_usize_exact(steps), steps)?;
    let mut y = cfg.start::<T>(m)?;
    let mut out = Path::zeros(grid, m);
    out.at_mut(0).copy_from_slice(&y);
    let mut st = FrozenStepper::new(c, t, x, mu, grid.dt());
    let mut r = rng::stream(cfg.seed, rng::tag::FROZEN, 0, 0);
    for k in 0..steps {
        st.step(&mut r, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, time: grid.node(k + 1).as_f64() });
        }
        out.at_mut(k + 1).copy_from_slice(&y);
    }
    Ok(out)
}

struct ChainStats {
    batch_means: Vec<Vec<f64>>,
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: usize,
}

/// Ergodic estimate of `b̄(t, x, μ)`: averages `b(t, x, μ, Y_s)` over
/// `cfg.chains` frozen chains after discarding the `burn_in` fraction.
pub fn estimate_bbar<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    t: T,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    cfg: &FrozenConfig,
    burn_in: f64,
) -> Result<BbarEstimate<T>> {
    estimate_average(c, t, x, mu, cfg, burn_in, c.slow_dim(), |y, out| c.drift(t, x, mu, y, out))
}

/// Ergodic average of an arbitrary observable of the frozen chain.
#[allow(clippy::too_many_arguments)]
pub fn estimate_average<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    t: T,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    cfg: &FrozenConfig,
    burn_in: f64,
    dim: usize,
    observable: impl Fn(&[T], &mut [T]) + Sync,
) -> Result<BbarEstimate<T>> {
    check_point(c, x, mu)?;
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::Domain(format!("burn_in must lie in [0, 1), got {burn_in}")));
    }
    let steps = cfg.steps()?;
    let burn = (burn_in * steps as f64).floor() as usize;
    let batch_len = (steps - burn) / cfg.batches;
    if batch_len == 0 {
        return Err(Error::Config(format!("{} post burn-in steps cannot fill {} batches", steps - burn, cfg.batches)));
    }
    let m = c.fast_dim();
    let y0 = cfg.start::<T>(m)?;
    let h = T::lit(cfg.step);

    let chains: Vec<Result<ChainStats>> = (0..cfg.chains)
        .into_par_iter()
        .map(|ch| {
            let mut st = FrozenStepper::new(c, t, x, mu, h);
            let mut r = rng::stream(cfg.seed, rng::tag::FROZEN, ch as u64, 0);
            let mut y = y0.clone();
            let mut obs = vec![T::zero(); dim];
            for k in 0..burn {
                st.step(&mut r, &mut y);
                if k % 1024 == 0 && y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { step: k + 1, time: (k + 1) as f64 * cfg.step });
                }
            }
            // Sums of `v - shift` keep a constant observable exact and avoid
            // cancellation; `shift` is the first post burn-in value.
            let mut shift: Option<Vec<f64>> = None;
            let mut s1 = vec![0.0; dim];
            let mut s2 = vec![0.0; dim];
            let mut batch_means = Vec::with_capacity(cfg.batches);
            for b in 0..cfg.batches {
                let mut bs = vec![0.0; dim];
                for _ in 0..batch_len {
                    st.step(&mut r, &mut y);
                    observable(&y, &mut obs);
                    let sh = shift.get_or_insert_with(|| obs.iter().map(|v| v.as_f64()).collect());
                    for i in 0..dim {
                        let d = obs[i].as_f64() - sh[i];
                        bs[i] += d;
                        s2[i] += d * d;
                    }
                }
                let sh = shift.as_ref().expect("batch is non-empty");
                let bm: Vec<f64> = (0..dim).map(|i| sh[i] + bs[i] / batch_len as f64).collect();
                for i in 0..dim {
                    s1[i] += bs[i];
                }
                if bm.iter().any(|v| !v.is_finite()) {
                    return Err(Error::BlowUp { step: burn + (b + 1) * batch_len, time: f64::NAN });
                }
                batch_means.push(bm);
            }
            let count = cfg.batches * batch_len;
            let sh = shift.expect("at least one sample");
            let cf = count as f64;
            let mean: Vec<f64> = (0..dim).map(|i| sh[i] + s1[i] / cf).collect();
            let m2: Vec<f64> = (0..dim).map(|i| (s2[i] - s1[i] * s1[i] / cf).max(0.0)).collect();
            let stats = ChainStats { batch_means, mean, m2, count };
            Ok(stats)
        })
        .collect();
    let chains: Vec<ChainStats> = chains.into_iter().collect::<Result<_>>()?;

    let total = chains.iter().map(|s| s.count).sum::<usize>();
    let nb = chains.iter().map(|s| s.batch_means.len()).sum::<usize>() as f64;
    let mut value = vec![0.0f64; dim];
    let mut k = 0usize;
    for s in &chains {
        for bm in &s.batch_means {
            k += 1;
            for i in 0..dim {
                value[i] += (bm[i] - value[i]) / k as f64;
            }
        }
    }
    let mut std_err = vec![0.0f64; dim];
    let mut eff = vec![total as f64; dim];
    for i in 0..dim {
        let ss: f64 = chains.iter().flat_map(|s| s.batch_means.iter()).map(|bm| (bm[i] - value[i]).powi(2)).sum();
        let se = if nb > 1.0 { (ss / (nb - 1.0) / nb).sqrt() } else { 0.0 };
        std_err[i] = se;
        // Pooled variance of the observable across chains.
        let m2: f64 = chains
            .iter()
            .map(|s| s.m2[i] + s.count as f64 * (s.mean[i] - value[i]).powi(2))
            .sum();
        let var = m2 / (total.max(2) - 1) as f64;
        if se > 0.0 {
            eff[i] = var / (se * se);
        }
    }
    Ok(BbarEstimate {
        value: value.into_iter().map(T::lit).collect(),
        std_err: std_err.into_iter().map(T::lit).collect(),
        effective_samples: eff,
        samples: total,
    })
}

/// How `b̄` is obtained for the averaged and limit equations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum BbarConfig {
    /// Closed form supplied by the coefficient set.
    #[default]
    Analytic,
    /// Ergodic Monte Carlo, cached on a lattice when the coefficients
    /// depend on the measure only through its mean and `n = 1`.
    MonteCarlo {
        frozen: FrozenConfig,
        burn_in: f64,
        /// Lattice spacing in `(t, x, mean(μ))`.
        spacing: [f64; 3],
    },
}

/// Resolves `cfg` into an averaged drift for `c`.
pub fn resolve_bbar<'a, T: Real, C: Coefficients<T> + ?Sized>(
    c: &'a C,
    cfg: &BbarConfig,
) -> Result<Box<dyn AveragedDrift<T> + 'a>> {
    match cfg {
        BbarConfig::Analytic => match c.closed_form_bbar() {
            Some(_) => Ok(Box::new(ClosedForm(c))),
            None => Err(Error::Unsupported("coefficients have no closed-form averaged drift; use monte_carlo".into())),
        },
        BbarConfig::MonteCarlo { frozen, burn_in, spacing } => {
            if spacing.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Config(format!("lattice spacing must be positive, got {spacing:?}")));
            }
            let lattice = c.slow_dim() == 1 && c.mean_field_only();
            Ok(Box::new(MonteCarloBbar {
                c,
                frozen: frozen.clone(),
                burn_in: *burn_in,
                spacing: *spacing,
                lattice,
                cache: Mutex::new(HashMap::new()),
            }))
        }
    }
}

struct ClosedForm<'a, C: ?Sized>(&'a C);

impl<T: Real, C: Coefficients<T> + ?Sized> AveragedDrift<T> for ClosedForm<'_, C> {
    fn eval(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        self.0.closed_form_bbar().expect("checked at resolve").eval(t, x, mu, out)
    }

    fn jacobian_x(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        self.0.closed_form_bbar().expect("checked at resolve").jacobian_x(t, x, mu, out)
    }
}

/// Monte Carlo `b̄`. On the lattice each node value has its own seed, so
/// results do not depend on evaluation order or thread count.
struct MonteCarloBbar<'a, T, C: ?Sized> {
    c: &'a C,
    frozen: FrozenConfig,
    burn_in: f64,
    spacing: [f64; 3],
    lattice: bool,
    cache: Mutex<HashMap<[i64; 3], T>>,
}

impl<T: Real, C: Coefficients<T> + ?Sized> MonteCarloBbar<'_, T, C> {
    fn node(&self, idx: [i64; 3]) -> T {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&idx) {
            return *v;
        }
        let t = T::lit(idx[0] as f64 * self.spacing[0]);
        let x = [T::lit(idx[1] as f64 * self.spacing[1])];
        let mu = EmpiricalMeasure::dirac(&[T::lit(idx[2] as f64 * self.spacing[2])]);
        let mut cfg = self.frozen.clone();
        cfg.seed = rng::derive(cfg.seed, rng::tag::FROZEN, idx[0] as u64 ^ ((idx[1] as u64) << 21), idx[2] as u64);
        let v = estimate_bbar(self.c, t, &x, &mu, &cfg, self.burn_in).map(|e| e.value[0]).unwrap_or(T::nan());
        self.cache.lock().expect("cache lock").insert(idx, v);
        v
    }
}

impl<T: Real, C: Coefficients<T> + ?Sized> AveragedDrift<T> for MonteCarloBbar<'_, T, C> {
    fn eval(&self, t: T, x: &[T], mu: &EmpiricalMeasure<T>, out: &mut [T]) {
        if !self.lattice {
            match estimate_bbar(self.c, t, x, mu, &self.frozen, self.burn_in) {
                Ok(e) => out.copy_from_slice(&e.value),
                Err(_) => out.iter_mut().for_each(|v| *v = T::nan()),
            }
            return;
        }
        let coords = [t.as_f64(), x[0].as_f64(), mu.mean()[0].as_f64()];
        if coords.iter().any(|v| !v.is_finite()) {
            out[0] = T::nan();
            return;
        }
        let mut base = [0i64; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let u = coords[a] / self.spacing[a];
            base[a] = u.floor() as i64;
            frac[a] = u - u.floor();
        }
        let mut acc = 0.0;
        for corner in 0..8u32 {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    idx[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.node(idx).as_f64();
            }
        }
        out[0] = T::lit(acc);
    }
}
