use serde::Serialize;

use super::skeleton::SkeletonProblem;
use crate::error::Result;
use crate::fractional::CMControl;
use crate::Real;

/// Sup-distances of skeleton paths along a control sequence.
#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceReport {
    pub gaps: Vec<f64>,
    /// Gaps never increase along the sequence.
    pub monotone: bool,
    /// Last gap is within tolerance.
    pub converged: bool,
    pub tolerance: f64,
}

/// `sup_t |G⁰(h_k) - G⁰(h)|` for each `h_k` in `sequence`.
pub fn weak_convergence_probe<T: Real>(
    p: &SkeletonProblem<'_, T>,
    sequence: &[CMControl<T>],
    limit: &CMControl<T>,
    tolerance: f64,
) -> Result<WeakConvergenceReport> {
    let target = p.solve(limit)?;
    let gaps = sequence
        .iter()
        .map(|h| Ok(p.solve(h)?.sup_distance(&target).as_f64()))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let converged = gaps.last().is_none_or(|g| *g <= tolerance);
    Ok(WeakConvergenceReport { gaps, monotone, converged, tolerance })
}
