use rayon::prelude::*;

use super::config::{Ensemble, LawSummary, ScaleParams, SimConfig};
use crate::coefficients::{Coefficients, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::fractional::{CMControl, FbmSampler, KOperator};
use crate::grid::{Density, TimeGrid};
use crate::rng::{self, StreamRng};
use crate::Real;

/// Output of one particle run.
#[derive(Debug, Clone)]
pub struct SimOutput<T> {
    pub slow: Ensemble<T>,
    pub fast: Ensemble<T>,
    /// Khasminskii auxiliary fast process, when requested.
    pub aux: Option<Ensemble<T>>,
    /// Summary of the law used as the measure argument, per node.
    pub law: Vec<LawSummary<T>>,
    pub fast_substeps: usize,
}

/// Control drifts on the simulation grid: `u̇ = K̇_H û` and `v̂`, both
/// piecewise constant per cell.
struct ControlDrift<T> {
    udot: Density<T>,
    vhat: Density<T>,
}

struct Plan<T> {
    control: Option<ControlDrift<T>>,
    aux_block: Option<usize>,
}

/// Per-particle state. The companion `(xc, yc)` is the uncontrolled system
/// driven by the same noise; it is only tracked for controlled runs.
struct Particle<T> {
    x: Vec<T>,
    y: Vec<T>,
    xc: Vec<T>,
    yc: Vec<T>,
    ya: Vec<T>,
    /// Controlled slow state at the current block start.
    xa_anchor: Vec<T>,
    fbm: Vec<T>,
    rng: StreamRng,
    slow_rec: Vec<T>,
    fast_rec: Vec<T>,
    aux_rec: Vec<T>,
    bx: Vec<T>,
    fy: Vec<T>,
    gm: Vec<T>,
    z: Vec<T>,
    dx: Vec<T>,
}

/// Euler–Maruyama for the coupled slow–fast particle system.
///
/// Each particle has its own fBm path and its own fast Brownian motion; the
/// measure argument is the empirical law of the current slow ensemble.
pub fn simulate_coupled<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    sp: ScaleParams<T>,
    cfg: &SimConfig<T>,
) -> Result<SimOutput<T>> {
    run(c, sp, cfg, Plan { control: None, aux_block: None })
}

/// Controlled system driven by `h = (û, v̂)`.
///
/// The measure argument is the law of the uncontrolled system, simulated
/// alongside with the same noise, so `h = 0` reproduces `simulate_coupled`
/// bit for bit. With `energy_bound = Some(M)` a control with `½‖h‖² > M` is
/// rejected.
pub fn simulate_controlled<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    sp: ScaleParams<T>,
    cfg: &SimConfig<T>,
    h: &CMControl<T>,
    energy_bound: Option<T>,
) -> Result<SimOutput<T>> {
    let control = control_drift(c, cfg, h, energy_bound)?;
    run(c, sp, cfg, Plan { control: Some(control), aux_block: None })
}

/// Controlled run that also builds the auxiliary fast process `Ȳ`: on each
/// block `[jΔ, (j+1)Δ)` the fast dynamics are frozen at the block start
/// `(jΔ, X^h_{jΔ}, law of X_{jΔ})`, carry no control and share the fast
/// Brownian increments of `Y^h`.
pub fn khasminskii_auxiliary<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    sp: ScaleParams<T>,
    cfg: &SimConfig<T>,
    block: T,
    h: &CMControl<T>,
) -> Result<SimOutput<T>> {
    let ratio = block / cfg.grid.dt();
    let steps = ratio.round();
    if !(steps >= T::one()) || (ratio - steps).abs() > T::lit(1e-9) * ratio {
        return Err(Error::Config(format!(
            "block length {} is not a positive multiple of the grid step {}",
            block.as_f64(),
            cfg.grid.dt().as_f64()
        )));
    }
    let control = control_drift(c, cfg, h, None)?;
    let aux_block = steps.to_usize().expect("finite block count");
    run(c, sp, cfg, Plan { control: Some(control), aux_block: Some(aux_block) })
}

fn control_drift<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    cfg: &SimConfig<T>,
    h: &CMControl<T>,
    energy_bound: Option<T>,
) -> Result<ControlDrift<T>> {
    TimeGrid::check_same(h.grid(), &cfg.grid)?;
    if h.uhat.dim() != c.slow_dim() || h.vhat.dim() != c.fast_dim() {
        return Err(Error::Dimension(format!(
            "control dims ({}, {}) do not match coefficients ({}, {})",
            h.uhat.dim(),
            h.vhat.dim(),
            c.slow_dim(),
            c.fast_dim()
        )));
    }
    if let Some(m) = energy_bound {
        let e = h.energy();
        if e > m {
            return Err(Error::EnergyGate { energy: e.as_f64(), bound: m.as_f64() });
        }
    }
    let op = KOperator::new(cfg.grid, cfg.hurst)?;
    Ok(ControlDrift { udot: op.apply_kdot(&h.uhat)?, vhat: h.vhat.clone() })
}

fn measure_of<T: Real>(particles: &[Particle<T>], n: usize, companion: bool) -> EmpiricalMeasure<T> {
    let mut atoms = Vec::with_capacity(particles.len() * n);
    for p in particles {
        atoms.extend_from_slice(if companion { &p.xc } else { &p.x });
    }
    EmpiricalMeasure::new(n, atoms).expect("non-empty ensemble")
}

fn run<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    sp: ScaleParams<T>,
    cfg: &SimConfig<T>,
    plan: Plan<T>,
) -> Result<SimOutput<T>> {
    let n = c.slow_dim();
    let m = c.fast_dim();
    cfg.check_dims(n, m)?;
    let substeps = cfg.substeps_for(sp.eps)?;
    let grid = cfg.grid;
    let steps = grid.steps();
    let dt = grid.dt();
    let h = dt / T::from_usize_exact(substeps);
    let sqrt_h = h.sqrt();
    let inv_eps = sp.eps.recip();
    let inv_sqrt_eps = inv_eps.sqrt();
    let ctrl_fast = (sp.delta * sp.eps).sqrt().recip();
    let noise = sp.delta.powf(cfg.hurst.value());
    let companion = plan.control.is_some();
    let aux = plan.aux_block;

    let sampler = FbmSampler::new(grid, cfg.hurst)?;
    let rec = |d: usize, on: bool| if on { Vec::with_capacity((steps + 1) * d) } else { Vec::new() };
    let mut parts: Vec<Particle<T>> = (0..cfg.particles)
        .into_par_iter()
        .map(|p| {
            let mut fbm = vec![T::zero(); (steps + 1) * n];
            let mut frng = rng::stream(cfg.seed, rng::tag::FBM, p as u64, 0);
            sampler.sample_into(&mut frng, n, &mut fbm);
            let mut part = Particle {
                x: cfg.x0.clone(),
                y: cfg.y0.clone(),
                xc: cfg.x0.clone(),
                yc: cfg.y0.clone(),
                ya: cfg.y0.clone(),
                xa_anchor: cfg.x0.clone(),
                fbm,
                rng: rng::stream(cfg.seed, rng::tag::FAST_BM, p as u64, 0),
                slow_rec: rec(n, true),
                fast_rec: rec(m, true),
                aux_rec: rec(m, aux.is_some()),
                bx: vec![T::zero(); n],
                fy: vec![T::zero(); m],
                gm: vec![T::zero(); m * m],
                z: vec![T::zero(); m],
                dx: vec![T::zero(); n],
            };
            part.slow_rec.extend_from_slice(&cfg.x0);
            part.fast_rec.extend_from_slice(&cfg.y0);
            if aux.is_some() {
                part.aux_rec.extend_from_slice(&cfg.y0);
            }
            part
        })
        .collect();

    let mut sigma = vec![T::zero(); n * n];
    let mut law = Vec::with_capacity(steps + 1);
    let mut anchor: Option<(T, EmpiricalMeasure<T>)> = None;

    for k in 0..steps {
        let t = grid.node(k);
        let mu = measure_of(&parts, n, companion);
        debug_assert_eq!(mu.len(), cfg.particles);
        law.push(LawSummary { mean: mu.mean().to_vec(), second_moment: mu.second_moment() });
        c.slow_diffusion(t, &mu, &mut sigma);
        if let Some(b) = aux {
            if k % b == 0 {
                parts.par_iter_mut().for_each(|p| p.xa_anchor.copy_from_slice(&p.x));
                anchor = Some((t, mu.clone()));
            }
        }
        let udot = plan.control.as_ref().map(|cd| cd.udot.at(k));
        let vhat = plan.control.as_ref().map(|cd| cd.vhat.at(k));
        let anchor_ref = anchor.as_ref();
        let sigma = &sigma;
        let mu = &mu;

        parts.par_iter_mut().for_each(|p| {
            // Slow increment from the state at t_k.
            let db = |i: usize, fbm: &[T]| fbm[(k + 1) * n + i] - fbm[k * n + i];
            c.drift(t, &p.x, mu, &p.y, &mut p.bx);
            for i in 0..n {
                let mut s = T::zero();
                for j in 0..n {
                    let mut w = noise * db(j, &p.fbm);
                    if let Some(u) = udot {
                        w += u[j] * dt;
                    }
                    s += sigma[i * n + j] * w;
                }
                p.dx[i] = p.bx[i] * dt + s;
            }
            if companion {
                c.drift(t, &p.xc, mu, &p.yc, &mut p.bx);
                for i in 0..n {
                    let mut s = T::zero();
                    for j in 0..n {
                        s += sigma[i * n + j] * (noise * db(j, &p.fbm));
                    }
                    p.bx[i] = p.bx[i] * dt + s;
                }
            }

            // Fast substeps frozen at (t_k, X_k, μ̂_k).
            for _ in 0..substeps {
                for z in p.z.iter_mut() {
                    *z = T::sample_normal(&mut p.rng) * sqrt_h;
                }
                fast_step(c, t, &p.x, mu, &mut p.y, &p.z, vhat, ctrl_fast * h, h, inv_eps, inv_sqrt_eps, &mut p.fy, &mut p.gm);
                if companion {
                    fast_step(c, t, &p.xc, mu, &mut p.yc, &p.z, None, T::zero(), h, inv_eps, inv_sqrt_eps, &mut p.fy, &mut p.gm);
                }
                if let Some((ta, mua)) = anchor_ref {
                    fast_step(c, *ta, &p.xa_anchor, mua, &mut p.ya, &p.z, None, T::zero(), h, inv_eps, inv_sqrt_eps, &mut p.fy, &mut p.gm);
                }
            }

            for i in 0..n {
                p.x[i] += p.dx[i];
            }
            if companion {
                for i in 0..n {
                    p.xc[i] += p.bx[i];
                }
            }
            p.slow_rec.extend_from_slice(&p.x);
            p.fast_rec.extend_from_slice(&p.y);
            if aux.is_some() {
                p.aux_rec.extend_from_slice(&p.ya);
            }
        });

        let finite = parts.par_iter().all(|p| {
            let ok = |v: &[T]| v.iter().all(|a| a.is_finite());
            ok(&p.x) && ok(&p.y) && (!companion || (ok(&p.xc) && ok(&p.yc))) && (aux.is_none() || ok(&p.ya))
        });
        if !finite {
            return Err(Error::BlowUp { step: k + 1, time: grid.node(k + 1).as_f64() });
        }
    }
    let mu = measure_of(&parts, n, companion);
    law.push(LawSummary { mean: mu.mean().to_vec(), second_moment: mu.second_moment() });

    let mut slow = Ensemble::zeros(grid, n, cfg.particles);
    let mut fast = Ensemble::zeros(grid, m, cfg.particles);
    let mut aux_out = aux.map(|_| Ensemble::zeros(grid, m, cfg.particles));
    for (p, dst) in parts.iter().zip(slow.chunks_mut()) {
        dst.copy_from_slice(&p.slow_rec);
    }
    for (p, dst) in parts.iter().zip(fast.chunks_mut()) {
        dst.copy_from_slice(&p.fast_rec);
    }
    if let Some(a) = aux_out.as_mut() {
        for (p, dst) in parts.iter().zip(a.chunks_mut()) {
            dst.copy_from_slice(&p.aux_rec);
        }
    }
    Ok(SimOutput { slow, fast, aux: aux_out, law, fast_substeps: substeps })
}

/// One explicit fast step
/// `y += f h/ε + g (Δw/√ε + v̂ c_v)` with all arguments frozen.
#[allow(clippy::too_many_arguments)]
#[inline]
fn fast_step<T: Real, C: Coefficients<T> + ?Sized>(
    c: &C,
    t: T,
    x: &[T],
    mu: &EmpiricalMeasure<T>,
    y: &mut [T],
    dw: &[T],
    vhat: Option<&[T]>,
    ctrl_scale: T,
    h: T,
    inv_eps: T,
    inv_sqrt_eps: T,
    fy: &mut [T],
    gm: &mut [T],
) {
    let m = y.len();
    c.fast_drift(t, x, mu, y, fy);
    c.fast_diffusion(t, x, mu, y, gm);
    for i in 0..m {
        let mut s = T::zero();
        for j in 0..m {
            let mut w = dw[j] * inv_sqrt_eps;
            if let Some(v) = vhat {
                w += v[j] * ctrl_scale;
            }
            s += gm[i * m + j] * w;
        }
        fy[i] = fy[i] * h * inv_eps + s;
    }
    for i in 0..m {
        y[i] += fy[i];
    }
}
