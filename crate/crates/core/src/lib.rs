//! Symmetric simple exclusion on `{1, ..., N-1}` with reservoirs acting on
//! windows of `K` sites at each end, slowed by `N^{-theta}`.
//!
//! - [`params`]: rates, aggregates and the structural assumptions.
//! - [`dynamics`]: exact continuous-time Monte Carlo with current counters.
//! - [`observables`]: grid functions, empirical profiles and current pairings.
//! - [`boundary`]: the operators `D` and `V`, the mass fixed point, the mass
//!   equation and the stationary line.
//! - [`pde`]: Crank-Nicolson and mild-form solvers, the Neumann heat kernel and
//!   weak residuals.
//! - [`oracle`]: the exact master equation for small `N`.
//! - [`harness`]: ensembles, experiments and tolerance-checked reports.

pub mod boundary;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod pde;
