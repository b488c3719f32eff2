//! Stochastic event-triggered remote state estimation.
//!
//! A sensor observes a linear-Gaussian plant and decides at every step,
//! through a randomized trigger, whether to ship its measurement to a remote
//! estimator. Because the trigger probability is a Gaussian-shaped function of
//! the measurement (open loop) or of the innovation (closed loop), the
//! estimator can fold the *absence* of a packet into an exact Kalman-style
//! update and the whole filter stays Gaussian.
//!
//! Module map:
//!
//! - [`model`]: plant definition, validation and stationary statistics.
//! - [`riccati`]: covariance/information Riccati maps, fixed points and the
//!   block-Gaussian conditioning identity.
//! - [`estimation`]: trigger policies and the filter recursions.
//! - [`analysis`]: communication rates and asymptotic covariance bounds.
//! - [`design`]: event-parameter design (fixed-point oracle, LMI certificate,
//!   bisection along a ray).
//! - [`harness`]: seeded simulation, Monte Carlo aggregation, scheduler
//!   comparison, the Singer tracking scenario and config/CSV I/O.

pub mod analysis;
pub mod design;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod riccati;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
pub use model::{SteadyState, SystemModel};
