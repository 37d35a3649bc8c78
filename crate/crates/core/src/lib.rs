//! Copula-based analysis of dependence between Fourier-coefficient magnitudes
//! of multichannel recordings.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`] segments recordings into epochs, computes DFT magnitudes and
//!   extracts frequency bands.
//! * [`marginals`] fits Gamma marginals to band magnitudes through a moving
//!   block bootstrap.
//! * [`copula`] holds the six-family Archimedean panel: evaluation, sampling,
//!   Kendall's tau, estimation, AIC selection and KLIC.
//! * [`ks_change`] compares successive joint models with a bivariate
//!   Kolmogorov-Smirnov statistic and flags changepoint epochs.
//! * [`calibration`] simulates the reference data-generating processes and
//!   derives empirical thresholds.
//! * [`dvine`] fits D-vines over epoch ranges and compares them with Clarke's
//!   sign test.
//! * [`recording`] reads and writes the CSV and raw binary recording formats.

pub mod calibration;
pub mod copula;
pub mod dvine;
mod error;
pub mod ks_change;
pub mod marginals;
pub mod numeric;
pub mod recording;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};

/// Version string embedded into every emitted report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
