//! Simulation and verification toolkit for multi-scale distribution-dependent
//! SDEs driven by fractional Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`special`] and [`quad`]: Gamma/Beta functions and quadrature rules.
//! * [`grid`]: the time lattice, node-sampled paths and cell-wise densities.
//! * [`fractional`]: fBm covariance, kernel, exact sampler, fractional
//!   calculus and the Cameron–Martin operators `K_H`, `K̇_H`.
//! * [`coefficients`]: coefficient sets, empirical measures, Wasserstein
//!   distances, moduli of continuity and assumption probes.
//! * [`multiscale`]: slow–fast particle simulation, frozen dynamics, averaged
//!   drift, averaged/limit equations and the block-frozen auxiliary process.
//! * [`ldp`]: skeleton equation, energies and variational rate evaluation.
//! * [`harness`]: Monte Carlo and scaling experiments.
//! * [`cli`]: configuration-driven entry point.
//!
//! All numerical code is generic over a [`Real`] scalar (`f32` or `f64`);
//! the `*64` aliases below fix the scalar to `f64`, which is what the
//! experiment harness and CLI use.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod fractional;
pub mod grid;
pub mod harness;
pub mod io;
pub mod ldp;
pub mod linalg;
pub mod multiscale;
pub mod optim;
pub mod quad;
pub mod rng;
mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub use coefficients::{Coefficients, EmpiricalMeasure, LinearFamily};
pub use fractional::{CMControl, Hurst, KOperator};
pub use grid::{Density, Path, TimeGrid};

pub type TimeGrid64 = grid::TimeGrid<f64>;
pub type Path64 = grid::Path<f64>;
pub type Density64 = grid::Density<f64>;
pub type Hurst64 = fractional::Hurst<f64>;
pub type CMControl64 = fractional::CMControl<f64>;
pub type KOperator64 = fractional::KOperator<f64>;
pub type EmpiricalMeasure64 = coefficients::EmpiricalMeasure<f64>;
pub type LinearFamily64 = coefficients::LinearFamily<f64>;
pub type SimConfig64 = multiscale::SimConfig<f64>;
pub type ScaleParams64 = multiscale::ScaleParams<f64>;

pub type TimeGrid32 = grid::TimeGrid<f32>;
pub type Path32 = grid::Path<f32>;
pub type Density32 = grid::Density<f32>;
