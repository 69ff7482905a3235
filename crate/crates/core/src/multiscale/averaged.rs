use rayon::prelude::*;

use super::config::{Ensemble, SimConfig};
use crate::coefficients::{AveragedDrift, Coefficients, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::fractional::FbmSampler;
use crate::grid::{Path, TimeGrid};
use crate::rng;
use crate::Real;

/// Euler scheme for the averaged particle system
/// `dX̄ = b̄(t, X̄, μ̂)dt + δ^H σ(t, μ̂)dB^H`; `δ = 1` is the averaged equation
/// proper.
///
/// Particle `p` uses the same fBm stream as in `simulate_coupled`, so the two
/// ensembles are strongly coupled under a shared seed.
pub fn solve_averaged<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    cfg: &SimConfig<T>,
    bbar: &dyn AveragedDrift<T>,
    delta: T,
) -> Result<Ensemble<T>> {
    let n = c.slow_dim();
    cfg.check_dims(n, c.fast_dim())?;
    let grid = cfg.grid;
    let steps = grid.steps();
    let dt = grid.dt();
    let noise = delta.powf(cfg.hurst.value());
    let sampler = FbmSampler::new(grid, cfg.hurst)?;
    let fbm: Vec<Vec<T>> = (0..cfg.particles)
        .into_par_iter()
        .map(|p| {
            let mut r = rng::stream(cfg.seed, rng::tag::FBM, p as u64, 0);
            let mut v = vec![T::zero(); (steps + 1) * n];
            sampler.sample_into(&mut r, n, &mut v);
            v
        })
        .collect();

    let mut out = Ensemble::zeros(grid, n, cfg.particles);
    let mut state: Vec<T> = cfg.x0.iter().cycle().take(n * cfg.particles).copied().collect();
    let mut sigma = vec![T::zero(); n * n];
    let mut rows: Vec<&mut [T]> = out.chunks_mut().collect();
    for (row, x) in rows.iter_mut().zip(state.chunks(n)) {
        row[..n].copy_from_slice(x);
    }
    for k in 0..steps {
        let t = grid.node(k);
        let mu = EmpiricalMeasure::new(n, state.clone())?;
        c.slow_diffusion(t, &mu, &mut sigma);
        let (sigma, mu) = (&sigma, &mu);
        state.par_chunks_mut(n).zip(rows.par_iter_mut()).zip(fbm.par_iter()).for_each(|((x, row), b)| {
            let mut bx = vec![T::zero(); n];
            bbar.eval(t, x, mu, &mut bx);
            for i in 0..n {
                let mut s = T::zero();
                for j in 0..n {
                    s += sigma[i * n + j] * (noise * (b[(k + 1) * n + j] - b[k * n + j]));
                }
                bx[i] = bx[i] * dt + s;
            }
            for i in 0..n {
                x[i] += bx[i];
            }
            row[(k + 1) * n..(k + 2) * n].copy_from_slice(x);
        });
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, time: grid.node(k + 1).as_f64() });
        }
    }
    drop(rows);
    Ok(out)
}

/// Classical RK4 for `dX̄⁰ = b̄(t, X̄⁰, δ_{X̄⁰})dt`; each stage uses the Dirac
/// measure of its own stage state.
pub fn solve_limit_ode<T: Real>(bbar: &dyn AveragedDrift<T>, grid: TimeGrid<T>, x0: &[T]) -> Result<Path<T>> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::Dimension("limit ODE needs a non-empty initial state".into()));
    }
    let dt = grid.dt();
    let half = dt * T::lit(0.5);
    let sixth = dt / T::lit(6.0);
    let mut out = Path::zeros(grid, n);
    out.at_mut(0).copy_from_slice(x0);
    let mut x = x0.to_vec();
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    let f = |t: T, s: &[T], out: &mut [T]| bbar.eval(t, s, &EmpiricalMeasure::dirac(s), out);
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let tm = t + half;
        f(t, &x, &mut k1);
        (0..n).for_each(|i| tmp[i] = x[i] + half * k1[i]);
        f(tm, &tmp, &mut k2);
        (0..n).for_each(|i| tmp[i] = x[i] + half * k2[i]);
        f(tm, &tmp, &mut k3);
        (0..n).for_each(|i| tmp[i] = x[i] + dt * k3[i]);
        f(grid.node(k + 1), &tmp, &mut k4);
        for i in 0..n {
            x[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1, time: grid.node(k + 1).as_f64() });
        }
        out.at_mut(k + 1).copy_from_slice(&x);
    }
    Ok(out)
}
