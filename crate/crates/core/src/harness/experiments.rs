use serde::Serialize;

use super::ladder::{batched, LadderSpec};
use super::stats::{fit_line, monotone_within_ci, strictly_decreasing, Estimate, LineFit};
use crate::coefficients::{AveragedDrift, Coefficients};
use crate::error::{Error, Result};
use crate::fractional::CMControl;
use crate::ldp::SkeletonProblem;
use crate::multiscale::{khasminskii_auxiliary, simulate_coupled, solve_averaged, solve_limit_ode, ScaleParams, SimConfig};

/// Log–log regression of `E|X_t - X_{t(Δ)}|²` on `Δ`.
#[derive(Debug, Clone, Serialize)]
pub struct IncrementReport {
    pub blocks: Vec<f64>,
    pub mean_sq_increment: Vec<Estimate>,
    pub fit: LineFit,
    /// `2H`, the exponent of the noise branch.
    pub reference_slope: f64,
}

/// Time-averaged `E|X_t - X_{t(Δ)}|²` with `t(Δ) = ⌊t/Δ⌋Δ`, over all grid
/// nodes, for each block length, followed by a log–log fit.
pub fn increment_scaling_experiment(
    c: &dyn Coefficients<f64>,
    sp: ScaleParams<f64>,
    base: &SimConfig<f64>,
    blocks: &[f64],
    replicas: usize,
) -> Result<IncrementReport> {
    let grid = base.grid;
    let dt = grid.dt();
    let strides = blocks
        .iter()
        .map(|b| {
            let s = (b / dt).round();
            // One step would make every node its own block start.
            if s < 2.0 || ((b / dt) - s).abs() > 1e-9 * s {
                Err(Error::Config(format!("block {b} must be a multiple of at least two grid steps {dt}")))
            } else {
                Ok(s as usize)
            }
        })
        .collect::<Result<Vec<usize>>>()?;
    let n = c.slow_dim();
    let steps = grid.steps();
    let per_block = batched(base, replicas, base.particles, 0, |cfg| {
        let out = simulate_coupled(c, sp, cfg)?;
        let mut v = Vec::with_capacity(cfg.particles * strides.len());
        for p in 0..cfg.particles {
            for &s in &strides {
                let mut acc = 0.0;
                for k in 0..=steps {
                    let a = out.slow.at(p, k);
                    let b = out.slow.at(p, (k / s) * s);
                    acc += (0..n).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
                }
                v.push(acc / (steps + 1) as f64);
            }
        }
        Ok(v)
    })?;
    let m = strides.len();
    let estimates: Vec<Estimate> = (0..m)
        .map(|j| Estimate::from_samples(&per_block.iter().skip(j).step_by(m).copied().collect::<Vec<_>>()))
        .collect();
    let lx: Vec<f64> = blocks.iter().map(|b| b.ln()).collect();
    let ly: Vec<f64> = estimates.iter().map(|e| e.mean.ln()).collect();
    Ok(IncrementReport {
        blocks: blocks.to_vec(),
        fit: fit_line(&lx, &ly),
        mean_sq_increment: estimates,
        reference_slope: 2.0 * base.hurst.value(),
    })
}

/// One rung of a convergence trend.
#[derive(Debug, Clone, Serialize)]
pub struct TrendRow {
    pub delta: f64,
    pub eps: f64,
    /// Primary gap `E sup_t |·|²`.
    pub gap: Estimate,
    /// Secondary diagnostic, if any.
    pub secondary: Option<Estimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub name: String,
    pub rows: Vec<TrendRow>,
    pub strictly_decreasing: bool,
    pub monotone_within_ci: bool,
}

impl TrendReport {
    fn new(name: &str, rows: Vec<TrendRow>) -> Self {
        let gaps: Vec<&Estimate> = rows.iter().map(|r| &r.gap).collect();
        Self {
            name: name.into(),
            strictly_decreasing: strictly_decreasing(&gaps),
            monotone_within_ci: monotone_within_ci(&gaps),
            rows,
        }
    }
}

fn sup_sq(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.chunks_exact(n)
        .zip(b.chunks_exact(n))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Strong averaging at noise scale `delta` (1 for the averaged equation
/// proper): `E sup_t |X^{δ,ε}_t - X̄_t|²` along `eps_ladder`, with `X̄` driven
/// by the same fBm. The secondary column is `E sup_t |X^{δ,ε}_t - X̄⁰_t|²`.
pub fn averaging_convergence_experiment(
    c: &dyn Coefficients<f64>,
    bbar: &dyn AveragedDrift<f64>,
    delta: f64,
    eps_ladder: &[f64],
    replicas: usize,
    base: &SimConfig<f64>,
) -> Result<TrendReport> {
    let n = c.slow_dim();
    let limit = solve_limit_ode(bbar, base.grid, &base.x0)?;
    let mut rows = Vec::new();
    for (i, &eps) in eps_ladder.iter().enumerate() {
        if i > 0 && !(eps < eps_ladder[i - 1]) {
            return Err(Error::Config("eps ladder must be strictly decreasing".into()));
        }
        let sp = ScaleParams::new(delta, eps)?;
        let samples = batched(base, replicas, base.particles, i as u64, |cfg| {
            let out = simulate_coupled(c, sp, cfg)?;
            let avg = solve_averaged(c, cfg, bbar, delta)?;
            let mut v = Vec::with_capacity(2 * cfg.particles);
            for p in 0..cfg.particles {
                v.push(sup_sq(out.slow.path_values(p), avg.path_values(p), n));
                v.push(sup_sq(out.slow.path_values(p), limit.values(), n));
            }
            Ok(v)
        })?;
        let gap: Vec<f64> = samples.iter().step_by(2).copied().collect();
        let lim: Vec<f64> = samples.iter().skip(1).step_by(2).copied().collect();
        rows.push(TrendRow {
            delta,
            eps,
            gap: Estimate::from_samples(&gap),
            secondary: Some(Estimate::from_samples(&lim)),
        });
    }
    Ok(TrendReport::new("averaging", rows))
}

/// Rounds `Δ = δ^{1/2}` to a positive multiple of the grid step.
fn block_for(delta: f64, dt: f64) -> f64 {
    (delta.sqrt() / dt).round().max(1.0) * dt
}

/// `E sup_t |X^{δ,ε,h} - X̄^h_t|²` along the ladder, where `X̄^h` is the
/// skeleton path of the same control. The secondary column is the auxiliary
/// error `∫E|Y^{δ,ε,h} - Ȳ|²dt` with blocks `Δ ≈ δ^{1/2}`.
pub fn controlled_convergence_experiment(
    c: &dyn Coefficients<f64>,
    bbar: &dyn AveragedDrift<f64>,
    ladder: &LadderSpec,
    base: &SimConfig<f64>,
    h: &CMControl<f64>,
    energy_bound: f64,
) -> Result<TrendReport> {
    if h.energy() > energy_bound {
        return Err(Error::EnergyGate { energy: h.energy(), bound: energy_bound });
    }
    let n = c.slow_dim();
    let m = c.fast_dim();
    let problem = SkeletonProblem::new(c, bbar, base.grid, base.hurst, &base.x0)?;
    let skeleton = problem.solve(h)?;
    let dt = base.grid.dt();
    let mut rows = Vec::new();
    for (i, sp) in ladder.scales()?.into_iter().enumerate() {
        let block = block_for(sp.delta, dt);
        let samples = batched(base, ladder.replicas, ladder.particles, i as u64, |cfg| {
            let out = khasminskii_auxiliary(c, sp, cfg, block, h)?;
            let aux = out.aux.as_ref().expect("auxiliary requested");
            let mut v = Vec::with_capacity(2 * cfg.particles);
            for p in 0..cfg.particles {
                v.push(sup_sq(out.slow.path_values(p), skeleton.values(), n));
                v.push(integrated_sq(out.fast.path_values(p), aux.path_values(p), m, dt));
            }
            Ok(v)
        })?;
        let gap: Vec<f64> = samples.iter().step_by(2).copied().collect();
        let auxe: Vec<f64> = samples.iter().skip(1).step_by(2).copied().collect();
        rows.push(TrendRow {
            delta: sp.delta,
            eps: sp.eps,
            gap: Estimate::from_samples(&gap),
            secondary: Some(Estimate::from_samples(&auxe)),
        });
    }
    Ok(TrendReport::new("controlled", rows))
}

/// Left-endpoint rule for `∫|a - b|²dt` over node-sampled paths.
fn integrated_sq(a: &[f64], b: &[f64], m: usize, dt: f64) -> f64 {
    a.chunks_exact(m)
        .zip(b.chunks_exact(m))
        .skip(1)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() * dt)
        .sum()
}

/// One cell of the auxiliary error surface.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceCell {
    pub ratio: f64,
    pub block: f64,
    pub error: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceReport {
    pub delta: f64,
    pub ratios: Vec<f64>,
    pub blocks: Vec<f64>,
    /// Row-major: `cells[i * blocks.len() + j]` is `(ratios[i], blocks[j])`.
    pub cells: Vec<SurfaceCell>,
    /// Non-increasing within CIs as `ε/δ` decreases, at every block length.
    pub monotone_in_ratio: bool,
    /// Non-increasing within CIs as `Δ` decreases, at every ratio.
    pub monotone_in_block: bool,
}

/// `∫E|Y^{δ,ε,h}_t - Ȳ_t|²dt` on a grid of `ε/δ` (decreasing) and block
/// lengths `Δ` (decreasing) at fixed `δ`.
pub fn auxiliary_error_experiment(
    c: &dyn Coefficients<f64>,
    delta: f64,
    ratios: &[f64],
    blocks: &[f64],
    replicas: usize,
    base: &SimConfig<f64>,
    h: &CMControl<f64>,
) -> Result<SurfaceReport> {
    let m = c.fast_dim();
    let dt = base.grid.dt();
    let mut cells = Vec::with_capacity(ratios.len() * blocks.len());
    for (i, &ratio) in ratios.iter().enumerate() {
        let sp = ScaleParams::new(delta, ratio * delta)?;
        for (j, &block) in blocks.iter().enumerate() {
            let rung = (i * blocks.len() + j) as u64;
            let errs = batched(base, replicas, base.particles, rung, |cfg| {
                let out = khasminskii_auxiliary(c, sp, cfg, block, h)?;
                let aux = out.aux.as_ref().expect("auxiliary requested");
                Ok((0..cfg.particles)
                    .map(|p| integrated_sq(out.fast.path_values(p), aux.path_values(p), m, dt))
                    .collect())
            })?;
            cells.push(SurfaceCell { ratio, block, error: Estimate::from_samples(&errs) });
        }
    }
    let nb = blocks.len();
    let monotone_in_ratio = (0..nb).all(|j| {
        let col: Vec<&Estimate> = (0..ratios.len()).map(|i| &cells[i * nb + j].error).collect();
        monotone_within_ci(&col)
    });
    let monotone_in_block = (0..ratios.len()).all(|i| {
        let row: Vec<&Estimate> = (0..nb).map(|j| &cells[i * nb + j].error).collect();
        monotone_within_ci(&row)
    });
    Ok(SurfaceReport { delta, ratios: ratios.to_vec(), blocks: blocks.to_vec(), cells, monotone_in_ratio, monotone_in_block })
}
