//! Tamed explicit Euler–Galerkin integrators for stochastic evolution
//! equations with superlinearly growing drift.
//!
//! The library is organized bottom-up:
//!
//! * [`spectral`] — trigonometric tensor-product bases, transforms, norms,
//!   projections, and the Galerkin constant c(m);
//! * [`operators`] — the example models (Ginzburg–Landau, Swift–Hohenberg,
//!   FitzHugh–Nagumo, a scalar toy), their drift/diffusion realizations, and
//!   numerical checkers for the structural assumptions;
//! * [`taming`] — the drift taming transform and its property checks;
//! * [`noise`] — reproducible counter-based sampling of truncated cylindrical
//!   Wiener increments with exact coarsening across resolutions;
//! * [`stepper`] — the tamed explicit scheme, its untamed counterpart, and a
//!   linearly implicit reference integrator;
//! * [`experiments`] — Monte Carlo studies (moments, time-step gap, strong
//!   convergence, divergence contrast) with deterministic aggregation.

pub mod error;
pub mod experiments;
pub mod noise;
pub mod operators;
pub mod spectral;
pub mod stepper;
pub mod taming;

pub use error::{Error, Result};
