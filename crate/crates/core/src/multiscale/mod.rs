//! Time stepping of the slow–fast particle system, its controlled version,
//! the frozen fast equation, and the averaged and limit equations.

mod averaged;
mod config;
mod engine;
mod frozen;

pub use averaged::{solve_averaged, solve_limit_ode};
pub use config::{validate_ladder, Ensemble, LawSummary, ScaleParams, SimConfig};
pub use engine::{khasminskii_auxiliary, simulate_controlled, simulate_coupled, SimOutput};
pub use frozen::{estimate_average, estimate_bbar, frozen_simulate, resolve_bbar, BbarConfig, BbarEstimate, FrozenConfig};

#[cfg(test)]
mod tests;
