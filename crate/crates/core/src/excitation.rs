//! Excitation metrics and scale information.
//!
//! Two complementary views of how much a trajectory tells an estimator about
//! metric scale. The excitation index `E = sigma(w_z) * sigma(a_y)` is a
//! cheap signal-variability proxy computed directly from IMU streams. The
//! Fisher information of the scale parameter is the exact quantity: each
//! sample contributes `|a_world|^2 / sigma_a^2`, because only the
//! acceleration term of the specific force scales with the reconstruction
//! while gravity does not. Its time integral lower-bounds the variance of
//! any unbiased scale estimator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::imusim::ImuSample;
use crate::math::Vec3;
use crate::trajgen::{check_monotone, KinematicSample};
use crate::types::NoiseModel;
use crate::{Error, Result};

/// Excitation below this is classified weak.
pub const WEAK_BELOW: f64 = 1e-4;
/// Excitation above this is classified strong.
pub const STRONG_ABOVE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Weak,
    Moderate,
    Strong,
}

impl Classification {
    pub fn from_index(e: f64) -> Self {
        if e < WEAK_BELOW {
            Classification::Weak
        } else if e > STRONG_ABOVE {
            Classification::Strong
        } else {
            Classification::Moderate
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Weak => "weak",
            Classification::Moderate => "moderate",
            Classification::Strong => "strong",
        })
    }
}

/// Signal-variability summary of an IMU series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationReport {
    /// Population standard deviation of the body yaw rate, rad/s.
    pub sigma_yaw_rate: f64,
    /// Population standard deviation of the body lateral specific force, m/s^2.
    pub sigma_lateral_accel: f64,
    /// Product of the two deviations.
    pub excitation_index: f64,
    pub classification: Classification,
}

/// Scale information accumulated along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleInformation {
    /// `(timestamp, |a_world|^2 / sigma_a^2)` per sample, 1/s.
    pub per_sample: Vec<(f64, f64)>,
    /// Trapezoidal time integral of `per_sample`, dimensionless.
    pub total: f64,
    /// `1 / sqrt(total)`; `None` when the motion carries no information
    /// (reported as "unobservable" in serialized output).
    pub crlb_std: Option<f64>,
}

/// Population standard deviation (two-pass, divides by `n`).
fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

fn index_over(samples: &[ImuSample]) -> (f64, f64, f64) {
    let sigma_wz = population_std(samples.iter().map(|s| s.angular_velocity_body.z));
    let sigma_ay = population_std(samples.iter().map(|s| s.specific_force_body.y));
    (sigma_wz, sigma_ay, sigma_wz * sigma_ay)
}

/// Excitation index over a whole IMU series.
pub fn excitation_index(samples: &[ImuSample]) -> Result<ExcitationReport> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            context: "excitation index",
            required: 2,
            actual: samples.len(),
        });
    }
    let (sigma_wz, sigma_ay, e) = index_over(samples);
    Ok(ExcitationReport {
        sigma_yaw_rate: sigma_wz,
        sigma_lateral_accel: sigma_ay,
        excitation_index: e,
        classification: Classification::from_index(e),
    })
}

/// Trailing-window excitation index, one `(timestamp, E)` pair per sample
/// once the first full window has elapsed.
///
/// A window covering the whole series therefore yields a single value equal
/// to [`excitation_index`] of the series.
pub fn excitation_windowed(
    samples: &[ImuSample],
    window_seconds: f64,
) -> Result<Vec<(f64, f64)>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            context: "windowed excitation",
            required: 2,
            actual: samples.len(),
        });
    }
    let span = samples.last().unwrap().timestamp - samples[0].timestamp;
    let mean_dt = span / (samples.len() - 1) as f64;
    if window_seconds.is_nan() || mean_dt.is_nan() || window_seconds < 2.0 * mean_dt {
        return Err(Error::invalid(
            "excitation window",
            format!(
                "window {window_seconds} s must cover at least two samples (mean spacing {mean_dt:.6} s)"
            ),
        ));
    }
    if window_seconds > span {
        return Err(Error::invalid(
            "excitation window",
            format!("window {window_seconds} s exceeds the series span {span} s"),
        ));
    }

    let mut out = Vec::new();
    let mut start = 0usize;
    for (k, s) in samples.iter().enumerate() {
        if s.timestamp - samples[0].timestamp < window_seconds {
            continue;
        }
        while samples[start].timestamp < s.timestamp - window_seconds {
            start += 1;
        }
        let (_, _, e) = index_over(&samples[start..=k]);
        out.push((s.timestamp, e));
    }
    Ok(out)
}

/// Fisher information about scale carried by a single accelerometer sample:
/// `|a_world|^2 / sigma_a^2`. Invariant under rotation of the input.
pub fn fisher_per_sample(accel_world: Vec3, sigma_a: f64) -> Result<f64> {
    if sigma_a.is_nan() || sigma_a <= 0.0 {
        return Err(Error::invalid(
            "accelerometer noise",
            format!("sigma_a must be positive, got {sigma_a}"),
        ));
    }
    Ok(accel_world.norm_squared() / (sigma_a * sigma_a))
}

/// Accumulated scale information of a kinematic series.
pub fn fisher_total(kinematics: &[KinematicSample], sigma_a: f64) -> Result<ScaleInformation> {
    if kinematics.len() < 2 {
        return Err(Error::TooFewSamples {
            context: "scale information",
            required: 2,
            actual: kinematics.len(),
        });
    }
    check_monotone(kinematics)?;
    let per_sample: Vec<(f64, f64)> = kinematics
        .iter()
        .map(|s| Ok((s.timestamp, fisher_per_sample(s.acceleration_world, sigma_a)?)))
        .collect::<Result<_>>()?;
    let total: f64 = per_sample
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum();
    let crlb_std = if total > 0.0 {
        Some(1.0 / total.sqrt())
    } else {
        None
    };
    Ok(ScaleInformation {
        per_sample,
        total,
        crlb_std,
    })
}

/// Monte Carlo check of the per-sample information formula.
///
/// At the true scale the measurement residual is pure accelerometer noise
/// `n`, so the log-likelihood score for scale is `n . (R^T a_world) /
/// sigma_a^2`. Its variance equals the Fisher information; this draws
/// `trials` noise vectors, forms the empirical score variance and returns
/// the relative error against `|a_world|^2 / sigma_a^2`. Zero-acceleration
/// samples carry zero information on both sides and return 0.
pub fn verify_fisher_against_likelihood(
    sample: &KinematicSample,
    noise: &NoiseModel,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials < 1_000 {
        return Err(Error::invalid(
            "fisher verification",
            format!("need at least 1000 trials for a stable variance estimate, got {trials}"),
        ));
    }
    noise.validate()?;
    let (sigma_a, _) = noise.per_sample_noise_std();
    if sigma_a.is_nan() || sigma_a <= 0.0 {
        return Err(Error::invalid(
            "fisher verification",
            "accelerometer noise must be positive".to_string(),
        ));
    }
    let direction = sample
        .rotation
        .inverse_transform(sample.acceleration_world);
    let analytic = direction.norm_squared() / (sigma_a * sigma_a);
    if analytic == 0.0 {
        return Ok(0.0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_var = 1.0 / (sigma_a * sigma_a);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let n = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ) * sigma_a;
        let score = n.dot(&direction) * inv_var;
        sum += score;
        sum_sq += score * score;
    }
    let n = trials as f64;
    let mean = sum / n;
    let empirical = sum_sq / n - mean * mean;
    Ok((empirical - analytic).abs() / analytic)
}
