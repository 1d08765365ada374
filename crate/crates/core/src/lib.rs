//! Asymptotic-preserving stochastic particle-in-cell methods for the
//! two-dimensional magnetized Vlasov–Poisson–Fokker–Planck system.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: scale parameters, magnetic profiles and the 2×2 matrix kernels.
//! - [`fields`]: analytic and grid-backed electric fields, grids, bilinear weights.
//! - [`pushers`]: single-particle integrators (APSI1, APSI2, Euler–Maruyama) and
//!   guiding-center integrators, each behind a trait and registered by name.
//! - [`noise`]: counter-based Gaussian noise keyed by (seed, particle, step).
//! - [`poisson`]: finite-difference Poisson solve and `E = -∇φ`.
//! - [`pic`]: particle ensemble, sampling, deposition, boundary handling and the PIC step.
//! - [`diagnostics`]: moments, conserved functionals, error metrics and slope fits.
//! - [`experiments`]: configuration, presets and the benchmark / diocotron runners.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod model;
pub mod noise;
pub mod pic;
pub mod poisson;
pub mod pushers;

pub use error::{Error, Result};
pub use model::{Mat2, MagneticProfile, ScaleParams, Vec2};

/// Version string written into every output manifest.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
