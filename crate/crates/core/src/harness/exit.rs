use serde::Serialize;

use super::ladder::{batched, LadderSpec};
use super::stats::ProbabilityEstimate;
use crate::coefficients::{AveragedDrift, Coefficients};
use crate::error::{Error, Result};
use crate::ldp::RateResult;
use crate::multiscale::{simulate_coupled, solve_limit_ode, SimConfig};

/// One rung of an exit-probability table.
#[derive(Debug, Clone, Serialize)]
pub struct ExitRow {
    pub delta: f64,
    pub eps: f64,
    pub estimate: ProbabilityEstimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitTable {
    pub radius: f64,
    pub rows: Vec<ExitRow>,
    /// Expected hits at the largest `δ` fell below 20.
    pub low_hits: bool,
}

/// Plain Monte Carlo for `P(sup_t |X^{δ,ε}_t - X̄⁰_t| ≥ r)` along the ladder.
pub fn mc_exit_probability(
    c: &dyn Coefficients<f64>,
    bbar: &dyn AveragedDrift<f64>,
    ladder: &LadderSpec,
    r: f64,
    base: &SimConfig<f64>,
) -> Result<ExitTable> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius must be non-negative, got {r}")));
    }
    let limit = solve_limit_ode(bbar, base.grid, &base.x0)?;
    let mut rows = Vec::new();
    for (i, sp) in ladder.scales()?.into_iter().enumerate() {
        let dist = batched(base, ladder.replicas, ladder.particles, i as u64, |cfg| {
            let out = simulate_coupled(c, sp, cfg)?;
            Ok((0..cfg.particles).map(|p| out.slow.sup_distance_to(p, &limit)).collect())
        })?;
        let hits = dist.iter().filter(|d| **d >= r).count() as u64;
        rows.push(ExitRow { delta: sp.delta, eps: sp.eps, estimate: ProbabilityEstimate::new(hits, dist.len() as u64) });
    }
    let low_hits = rows.first().is_some_and(|row| row.estimate.p * (row.estimate.replicas as f64) < 20.0);
    Ok(ExitTable { radius: r, rows, low_hits })
}

/// One rung of the large-deviation scaling report.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeRow {
    pub delta: f64,
    pub p: f64,
    pub delta_log_p: f64,
    /// `δ^{2H} log p̂`, the speed matching the noise amplitude.
    pub delta_2h_log_p: f64,
    /// `|δ log p̂ + I| / I`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpReport {
    pub rate: f64,
    pub rows: Vec<SlopeRow>,
    /// `δ log p̂` decreases along the ladder.
    pub decreasing: bool,
    /// Relative gap at the smallest rung with hits.
    pub final_gap: Option<f64>,
    /// Fewer than three rungs with hits.
    pub inconclusive: bool,
}

/// Compares `δ log p̂(δ)` with `-I` along a ladder ordered by decreasing `δ`.
pub fn ldp_slope_report(probabilities: &[(f64, f64)], rate: f64, hurst: f64) -> LdpReport {
    let rows: Vec<SlopeRow> = probabilities
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|&(delta, p)| {
            let lp = p.ln();
            SlopeRow {
                delta,
                p,
                delta_log_p: delta * lp,
                delta_2h_log_p: delta.powf(2.0 * hurst) * lp,
                relative_gap: (delta * lp + rate).abs() / rate,
            }
        })
        .collect();
    let inconclusive = rows.len() < 3;
    let decreasing = !inconclusive && rows.windows(2).all(|w| w[1].delta_log_p < w[0].delta_log_p);
    LdpReport { rate, final_gap: rows.last().map(|r| r.relative_gap), rows, decreasing, inconclusive }
}

/// Convenience wrapper taking the table and a rate result.
pub fn ldp_report_from(table: &ExitTable, rate: &RateResult<f64>, hurst: f64) -> LdpReport {
    let probs: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.delta, r.estimate.p)).collect();
    ldp_slope_report(&probs, rate.value, hurst)
}
