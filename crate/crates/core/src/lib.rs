//! Analysis toolkit for metric-scale observability in visual-inertial
//! navigation.
//!
//! Monocular visual odometry recovers motion only up to an unknown scale
//! factor; fusing an IMU makes that scale observable exactly when the
//! trajectory accelerates. This crate provides the pieces needed to study
//! and quantify that effect end to end:
//!
//! - [`trajgen`]: constant-speed planar reference trajectories (straight,
//!   circle, figure-eight),
//! - [`imusim`]: inverse-dynamics IMU synthesis with seeded noise and bias
//!   random walks, plus the matching strapdown integrator,
//! - [`excitation`]: excitation indices and scale-information integrals with
//!   the implied estimation lower bounds,
//! - [`observability`]: a numerical observability Gramian over the full
//!   state (pose, velocity, biases, landmarks) with rank and nullspace
//!   reporting,
//! - [`scalest`]: maximum-likelihood and regression scale estimators plus a
//!   Monte Carlo experiment driver,
//! - [`allan`]: overlapping Allan deviation and noise-parameter recovery,
//! - [`io`]: the CSV/JSON interchange formats used by the CLI.

pub mod allan;
pub mod error;
pub mod excitation;
pub mod imusim;
pub mod io;
pub mod math;
pub mod observability;
pub mod scalest;
pub mod trajgen;
pub mod types;

pub use error::{Error, Result};
pub use math::{skew, Mat3, Rot3, Vec3};
pub use types::{GravityModel, NavState, NoiseModel};
