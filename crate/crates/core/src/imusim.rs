//! Inverse-dynamics IMU synthesis and strapdown re-integration.
//!
//! [`synthesize`] turns reference kinematics into ideal rate-gyro and
//! specific-force measurements, then layers seeded white noise and bias
//! random walks on top. [`integrate`] is the matching strapdown mechanization
//! used both for round-trip validation and for the observability analysis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::math::{Rot3, Vec3};
use crate::trajgen::{check_monotone, KinematicSample};
use crate::types::{GravityModel, NavState, NoiseModel};
use crate::{Error, Result};

/// One IMU sample: body-frame angular rate and specific force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Time since the start of the run, s.
    pub timestamp: f64,
    /// Measured angular velocity in the body frame, rad/s.
    pub angular_velocity_body: Vec3,
    /// Measured specific force in the body frame, m/s^2.
    pub specific_force_body: Vec3,
}

/// Per-sample bias values used while synthesizing a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiasTrajectory {
    pub gyro: Vec<Vec3>,
    pub accel: Vec<Vec3>,
}

/// Ideal (noise-free, bias-free) measurements for one kinematic sample.
///
/// The gyro sees the body angular velocity, which for planar motion with the
/// x axis along the velocity is the yaw rate about body z. The accelerometer
/// sees the specific force `R^T (a_world - g)`.
pub(crate) fn exact_measurements(sample: &KinematicSample, gravity: Vec3) -> (Vec3, Vec3) {
    let omega = Vec3::new(0.0, 0.0, sample.yaw_rate);
    let force = sample
        .rotation
        .inverse_transform(sample.acceleration_world - gravity);
    (omega, force)
}

/// Simulates an IMU observing `kinematics`.
///
/// White noise uses the per-sample standard deviations of `noise`; biases
/// start at the given values and follow independent Gaussian random walks
/// with increments `random_walk * sqrt(dt)`. The draw order per sample is
/// fixed (gyro noise, accel noise, gyro walk, accel walk, three axes each),
/// so a given seed yields bitwise-identical output.
pub fn synthesize(
    kinematics: &[KinematicSample],
    noise: &NoiseModel,
    gravity: &GravityModel,
    initial_gyro_bias: Vec3,
    initial_accel_bias: Vec3,
    seed: u64,
) -> Result<(Vec<ImuSample>, BiasTrajectory)> {
    if kinematics.is_empty() {
        return Err(Error::TooFewSamples {
            context: "imu synthesis",
            required: 1,
            actual: 0,
        });
    }
    check_monotone(kinematics)?;
    noise.validate()?;

    let (sigma_a, sigma_g) = noise.per_sample_noise_std();
    let g = gravity.vector();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |sigma: f64| -> Vec3 {
        let z = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        z * sigma
    };

    let mut gyro_bias = initial_gyro_bias;
    let mut accel_bias = initial_accel_bias;
    let mut samples = Vec::with_capacity(kinematics.len());
    let mut biases = BiasTrajectory {
        gyro: Vec::with_capacity(kinematics.len()),
        accel: Vec::with_capacity(kinematics.len()),
    };

    for (k, kin) in kinematics.iter().enumerate() {
        let (omega, force) = exact_measurements(kin, g);
        let gyro_noise = draw(sigma_g);
        let accel_noise = draw(sigma_a);
        samples.push(ImuSample {
            timestamp: kin.timestamp,
            angular_velocity_body: omega + gyro_bias + gyro_noise,
            specific_force_body: force + accel_bias + accel_noise,
        });
        biases.gyro.push(gyro_bias);
        biases.accel.push(accel_bias);

        if k + 1 < kinematics.len() {
            let dt = kinematics[k + 1].timestamp - kin.timestamp;
            let sqrt_dt = dt.sqrt();
            gyro_bias += draw(noise.gyro_random_walk * sqrt_dt);
            accel_bias += draw(noise.accel_random_walk * sqrt_dt);
        }
    }
    Ok((samples, biases))
}

/// Rescales a trajectory as a monocular reconstruction would see it.
///
/// Positions, velocities and accelerations are multiplied by `factor`;
/// curvature magnitude divides by it. Rotations, timestamps, yaw rates and
/// curvature signs are scale-invariant and stay untouched.
pub fn apply_scale(
    kinematics: &[KinematicSample],
    factor: f64,
) -> Result<Vec<KinematicSample>> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::invalid(
            "scale factor",
            format!("must be positive and finite, got {factor}"),
        ));
    }
    Ok(kinematics
        .iter()
        .map(|s| KinematicSample {
            timestamp: s.timestamp,
            position_world: s.position_world * factor,
            velocity_world: s.velocity_world * factor,
            acceleration_world: s.acceleration_world * factor,
            rotation: s.rotation,
            yaw_rate: s.yaw_rate,
            curvature: s.curvature / factor,
        })
        .collect())
}

/// Strapdown integration of an IMU series from an initial state.
///
/// Second-order scheme: the rotation advances through the exponential of the
/// midpoint angular rate, while velocity and position use trapezoidal
/// updates with the specific force rotated at both interval endpoints. The
/// endpoint form keeps a body spinning in place exactly in place, because
/// `R_k a_k` then equals `-g` at every sample. Rotations are re-orthonormalized
/// after every step. Biases are taken from `initial` and held constant.
pub fn integrate(
    samples: &[ImuSample],
    initial: &NavState,
    gravity: &GravityModel,
) -> Result<Vec<NavState>> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples {
            context: "strapdown integration",
            required: 1,
            actual: 0,
        });
    }
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::NonMonotoneTimestamps {
                index: i + 1,
                timestamp: w[1].timestamp,
            });
        }
    }

    let g = gravity.vector();
    let b_g = initial.gyro_bias;
    let b_a = initial.accel_bias;
    let mut states = Vec::with_capacity(samples.len());
    states.push(NavState {
        timestamp: samples[0].timestamp,
        ..*initial
    });

    for w in samples.windows(2) {
        let prev = *states.last().unwrap();
        let dt = w[1].timestamp - w[0].timestamp;
        let omega_mid = (w[0].angular_velocity_body + w[1].angular_velocity_body) * 0.5 - b_g;
        let rotation = (prev.rotation * Rot3::exp(omega_mid * dt)).renormalized();

        let accel_start = prev.rotation * (w[0].specific_force_body - b_a);
        let accel_end = rotation * (w[1].specific_force_body - b_a);
        let velocity = prev.velocity_world + (accel_start + accel_end) * (0.5 * dt) + g * dt;
        let position = prev.position_world + (prev.velocity_world + velocity) * (0.5 * dt);

        states.push(NavState {
            rotation,
            velocity_world: velocity,
            position_world: position,
            gyro_bias: b_g,
            accel_bias: b_a,
            timestamp: w[1].timestamp,
        });
    }
    Ok(states)
}

/// Initial [`NavState`] matching the first sample of a kinematic series,
/// with zero biases.
pub fn initial_state(sample: &KinematicSample) -> NavState {
    NavState {
        rotation: sample.rotation,
        velocity_world: sample.velocity_world,
        position_world: sample.position_world,
        gyro_bias: Vec3::zeros(),
        accel_bias: Vec3::zeros(),
        timestamp: sample.timestamp,
    }
}
