//! Streaming partial least squares.
//!
//! The crate implements the projection-free stochastic generalized Hebbian
//! update for the rank-1 two-view problem `max u'Σv` over unit vectors, the
//! convex matrix stochastic gradient baseline, and a diagnostics layer that
//! evaluates the ODE/SDE approximations of the Hebbian iteration (closed-form
//! ODE flow, Ornstein-Uhlenbeck moments, phase-time and step-size predictors).
//!
//! Module map:
//! - [`pls_core`]: samples, iterates, the Hebbian step, the driver loop and error metrics.
//! - [`landscape`]: stationary points of the Lagrangian and their stability.
//! - [`diffusion`]: spectral basis, ODE solution, O-U moments and phase predictions.
//! - [`msg`]: the convex baseline with its nuclear-norm/spectral-norm projection.
//! - [`datagen`]: Gaussian two-view generative model, masking and CSV ingestion.
//! - [`oracle`]: Jacobi SVD / eigensolver, empirical moments, finite differences, Φ⁻¹.
//! - [`experiment`]: multi-seed experiment harness behind the `spls` binary.

pub mod datagen;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod landscape;
pub mod msg;
pub mod oracle;
pub mod pls_core;

pub use error::{Error, Result};
