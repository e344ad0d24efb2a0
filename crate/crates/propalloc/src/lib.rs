//! A desk-scale laboratory for the proportional allocation (Kelly) mechanism
//! over divisible resources.
//!
//! The crate simulates the mechanism and its polyhedral variant, checks
//! structural properties of valuation families, computes brute-force welfare
//! optima, finds and verifies equilibria (pure, mixed, coarse-correlated,
//! Bayesian), and ships executable builders for the lower-bound instances
//! together with their closed-form equilibrium profiles. Everything is
//! deterministic given a seed: stochastic estimates use counter-mode RNG
//! streams and fixed-chunk reductions, so results are bit-identical whether
//! the `parallel` feature (rayon) is enabled or not.
//!
//! Module map:
//! - [`mechanism`]: allocations, payments, utilities for both mechanism modes
//! - [`valuation`]: the valuation families plus sampling-based property checks
//! - [`welfare`]: social / effective welfare and the grid enumeration oracle
//! - [`equilibrium`]: best responses, dynamics, no-regret learning, verifiers,
//!   and the deviation samplers used as diagnostics
//! - [`constructions`]: the named lower-bound instances with closed forms
//! - [`suites`]: seeded random instance suites used by the property gates

pub mod constructions;
pub mod equilibrium;
pub mod exec;
pub mod mechanism;
pub mod suites;
pub mod valuation;
pub mod welfare;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Absolute tolerance for feasibility checks on allocations and weights.
pub const FEASIBILITY_TOL: f64 = 1e-12;
