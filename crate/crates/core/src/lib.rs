//! Simulation and closed-form analysis of wireless-powered communication
//! through a reconfigurable intelligent sensing surface (RISS).
//!
//! The surface senses the user and HAP directions with a small active
//! L-array, then configures its passive elements from those angle estimates
//! alone. This crate provides the channel model, the angle-driven reflection
//! design, the analytic energy and spectral-efficiency expressions (with and
//! without angle errors), Gamma moment matching for outage planning, a
//! ROOT-MUSIC estimator and a reproducible Monte Carlo engine.

pub mod analytics;
pub mod beamforming;
pub mod distribution;
pub mod doa;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};

/// Complex baseband sample type used everywhere.
pub type C64 = num_complex::Complex64;

/// `10 log10(x)`.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Inverse of [`to_db`].
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    from_db(dbm - 30.0)
}
