//! Nonparametric geostatistical risk mapping.
//!
//! The crate estimates unconditional threshold-exceedance probabilities
//! `P(Y(x0) >= c)` from spatial point data. The large-scale trend is fitted with
//! a multivariate local linear smoother, the small-scale dependence with a
//! bias-corrected local linear variogram estimator followed by a Shapiro-Botha
//! model fit, and the probabilities come from a semiparametric bootstrap that
//! resamples decorrelated residuals and adds simple kriging predictions.
//!
//! The crate is `no_std` (with `alloc`). The `std` feature enables `std`
//! integration of the dependencies and `parallel` evaluates bootstrap
//! replicates, smoother rows and Monte Carlo replicates on a rayon pool.
//! Results never depend on the number of worker threads.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod bootstrap;
pub mod error;
pub mod geometry;
pub mod kriging;
pub mod numerics;
pub mod rng;
pub mod simulation;
pub mod trend;
pub mod variogram;

mod maybe_rayon;

pub use error::{Error, Result};
pub use geometry::{BandwidthMatrix, Point, RegularGrid, SpatialSample};
pub use numerics::linalg::Matrix;
