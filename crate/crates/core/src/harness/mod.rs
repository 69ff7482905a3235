//! Monte Carlo and scaling experiments: exit probabilities and their
//! large-deviation scaling, increment scaling, and averaging, controlled and
//! auxiliary convergence trends.

mod exit;
mod experiments;
mod ladder;
pub mod stats;

pub use exit::{ldp_report_from, ldp_slope_report, mc_exit_probability, ExitRow, ExitTable, LdpReport, SlopeRow};
pub use experiments::{
    auxiliary_error_experiment, averaging_convergence_experiment, controlled_convergence_experiment,
    increment_scaling_experiment, IncrementReport, SurfaceCell, SurfaceReport, TrendReport, TrendRow,
};
pub use ladder::{EpsRule, LadderSpec};
pub use stats::{Estimate, ProbabilityEstimate};

#[cfg(test)]
mod tests;
