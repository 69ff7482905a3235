//! Skeleton dynamics, control energies and variational evaluation of the
//! rate function.

mod probe;
mod rate;
mod skeleton;

pub use probe::{weak_convergence_probe, WeakConvergenceReport};
pub use rate::{rate_of_event, rate_of_path, RateConfig, RateResult, RateSummary};
pub use skeleton::{energy, skeleton_solve, SkeletonProblem};
