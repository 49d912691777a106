//! Shared state and sensor-model types.

use serde::{Deserialize, Serialize};

use crate::math::{Rot3, Vec3};
use crate::{Error, Result};

/// Full navigation state at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    /// Body-to-world rotation.
    pub rotation: Rot3,
    /// Velocity in the world frame, m/s.
    pub velocity_world: Vec3,
    /// Position in the world frame, m.
    pub position_world: Vec3,
    /// Gyroscope bias, rad/s.
    pub gyro_bias: Vec3,
    /// Accelerometer bias, m/s^2.
    pub accel_bias: Vec3,
    /// Time since the start of the run, s.
    pub timestamp: f64,
}

impl NavState {
    /// State at rest at the origin with identity attitude and zero biases.
    pub fn at_rest(timestamp: f64) -> Self {
        NavState {
            rotation: Rot3::identity(),
            velocity_world: Vec3::zeros(),
            position_world: Vec3::zeros(),
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            timestamp,
        }
    }
}

/// Gravity vector in the world frame.
///
/// The world frame is z-up, so the default is `(0, 0, -9.81)` m/s^2. The
/// checked constructor accepts only near-Earth magnitudes; use
/// [`GravityModel::with_override`] for anything else.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityModel {
    vector: Vec3,
}

/// Accepted gravity magnitude range for [`GravityModel::new`], m/s^2.
pub const GRAVITY_NORM_RANGE: (f64, f64) = (9.7, 9.9);

impl GravityModel {
    pub fn new(vector: Vec3) -> Result<Self> {
        let norm = vector.norm();
        let (lo, hi) = GRAVITY_NORM_RANGE;
        if !(norm >= lo && norm <= hi) {
            return Err(Error::invalid(
                "gravity model",
                format!("norm {norm} outside [{lo}, {hi}] m/s^2; use with_override for non-Earth values"),
            ));
        }
        Ok(GravityModel { vector })
    }

    /// Accepts any vector, bypassing the magnitude check.
    pub fn with_override(vector: Vec3) -> Self {
        GravityModel { vector }
    }

    pub fn vector(&self) -> Vec3 {
        self.vector
    }
}

impl Default for GravityModel {
    fn default() -> Self {
        GravityModel {
            vector: Vec3::new(0.0, 0.0, -9.81),
        }
    }
}

/// Continuous-time IMU noise parameters plus the sampling rate.
///
/// Densities are spectral: accelerometer noise in (m/s^2)/sqrt(Hz), gyro
/// noise in (rad/s)/sqrt(Hz); bias random walks in (m/s^3)/sqrt(Hz) and
/// (rad/s^2)/sqrt(Hz). Discretization to per-sample standard deviations uses
/// half the sampling bandwidth: `sigma = density * sqrt(rate / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub accel_noise_density: f64,
    pub gyro_noise_density: f64,
    pub accel_random_walk: f64,
    pub gyro_random_walk: f64,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate.is_nan() || self.sample_rate <= 0.0 {
            return Err(Error::invalid(
                "noise model",
                format!("sample_rate must be positive, got {}", self.sample_rate),
            ));
        }
        for (name, v) in [
            ("accel_noise_density", self.accel_noise_density),
            ("gyro_noise_density", self.gyro_noise_density),
            ("accel_random_walk", self.accel_random_walk),
            ("gyro_random_walk", self.gyro_random_walk),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(Error::invalid(
                    "noise model",
                    format!("{name} must be nonnegative, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Noise-free model at the given rate.
    pub fn zero(sample_rate: f64) -> Self {
        NoiseModel {
            accel_noise_density: 0.0,
            gyro_noise_density: 0.0,
            accel_random_walk: 0.0,
            gyro_random_walk: 0.0,
            sample_rate,
        }
    }

    /// Per-sample white-noise standard deviations `(accel, gyro)`.
    pub fn per_sample_noise_std(&self) -> (f64, f64) {
        let factor = (self.sample_rate / 2.0).sqrt();
        (
            self.accel_noise_density * factor,
            self.gyro_noise_density * factor,
        )
    }
}

impl Default for NoiseModel {
    /// Parameters measured for a consumer-grade MEMS IMU sampled at 33 Hz.
    fn default() -> Self {
        NoiseModel {
            accel_noise_density: 3.31e-3,
            gyro_noise_density: 2.22e-2,
            accel_random_walk: 7.23e-5,
            gyro_random_walk: 8.83e-5,
            sample_rate: 33.0,
        }
    }
}
