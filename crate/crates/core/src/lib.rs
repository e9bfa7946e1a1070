//! Simulation and statistical verification engine for the parabolic and
//! hyperbolic Anderson models driven by space-time colored Gaussian noise.
//!
//! The solution is represented by a truncated Wiener chaos expansion over a
//! discretized noise; spatial averages, their normalizing variances, and a
//! battery of limit-theorem diagnostics (quantitative CLT distances, almost
//! sure CLT log-averages, the Ibragimov-Lifshits statistic, and
//! second-order-Poincare variance bounds) are built on top of it.

pub mod chaos;
pub mod config;
pub mod covariance;
pub mod error;
pub mod fields;
pub mod fit;
pub mod greenconv;
pub mod grid;
pub mod kernels;
pub mod limits;
pub mod linalg;
pub mod noise;
pub mod numeric;
pub mod runner;

pub use error::{Error, Result};
