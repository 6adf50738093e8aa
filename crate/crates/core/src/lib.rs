//! Simulation and convergence analysis for a piecewise-deterministic model of
//! food-contaminant exposure.
//!
//! The body burden `X` decays like `dX/dt = -Theta X` between intakes, jumps
//! by a random amount `U ~ F` at each intake, and intakes arrive after
//! waiting times with law `G` (hazard `zeta`); the elimination rate `Theta`
//! is redrawn from `H` at every intake. The crate provides:
//!
//! * [`distributions`]: the parametric laws and hazard machinery,
//! * [`pdmp_sim`]: exact event-driven simulation of `(X, Theta, A)`,
//! * [`coupling`]: coupled simulation of two copies and the three-phase
//!   coalescence construction,
//! * [`rates`]: every analytic rate and constant behind the total variation
//!   and Wasserstein bounds,
//! * [`estimators`]: Monte Carlo estimates to hold the bounds against,
//! * [`config`] and [`experiment`]: run configuration and orchestration used
//!   by the command-line tool.

pub mod config;
pub mod coupling;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod pdmp_sim;
pub mod quadrature;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
