//! Detection of unknown wideband signals on mutually-coupled antenna arrays.
//!
//! The crate is organised bottom-up:
//!
//! - [`covariance`]: frequency-indexed noise covariances `R_k` and their
//!   spectral factors, synthetic coupling presets and a text file format.
//! - [`signalmodel`]: steering channels, SNR calibration, signal synthesis and
//!   sampling of received data under either hypothesis.
//! - [`detectors`]: the moving-average, constant-regime, rapid-regime
//!   (extended energy) and known-signal upper-bound statistics.
//! - [`analytic`]: exact laws of those statistics and a generalized chi-square
//!   CDF/quantile evaluator.
//! - [`montecarlo`]: reproducible parallel simulation of the statistics.
//! - [`experiments`]: ROC curves, `theta_k` sweeps and distribution overlays.
//!
//! Complex Gaussian convention: a standard complex Gaussian entry has
//! independent real and imaginary parts of unit variance, so sampled noise
//! satisfies `E[n n^H] = 2 R_k`. Every distributional result in [`analytic`]
//! is stated under this convention.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod covariance;
pub mod detectors;
mod error;
pub mod experiments;
pub mod grid;
pub mod linalg;
pub mod montecarlo;
pub mod signalmodel;

pub use error::{Error, Result};
pub use grid::SamplingGrid;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
