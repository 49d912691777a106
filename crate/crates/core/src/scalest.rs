//! Metric scale estimation from up-to-scale kinematics and IMU data.
//!
//! A monocular reconstruction recovers motion only up to a global scale
//! factor `s`. The accelerometer breaks the ambiguity: its reading is
//! `f = R^T (s * vdot_mono - g) + b_a + noise`, and gravity does not scale
//! with the reconstruction while true acceleration does. [`estimate_scale_ml`]
//! exploits that asymmetry with a maximum-likelihood fit. The regression
//! half of the module implements the distance-pair protocol used to score
//! full runs: the slope of estimated versus true cumulative distance is the
//! scale, and its running version shows how the estimate converges as the
//! platform covers distance.

pub mod experiment;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::excitation::fisher_total;
use crate::imusim::ImuSample;
use crate::math::Vec3;
use crate::trajgen::KinematicSample;
use crate::types::{GravityModel, NoiseModel};
use crate::{Error, Result};

/// Below this much accumulated scale information the ML estimator refuses to
/// produce a number (less than one effective unit of Fisher information).
pub const UNOBSERVABLE_INFORMATION: f64 = 1.0;

/// Gauss-Newton stops when no parameter moves by more than this.
pub const CONVERGENCE_STEP: f64 = 1e-10;

/// Gauss-Newton iteration cap.
pub const MAX_ITERATIONS: usize = 100;

/// Estimating the accelerometer bias alongside the scale is declared
/// degenerate once it would inflate the scale variance by more than this
/// factor. A constant body-frame acceleration makes the two parameters
/// exactly collinear, which floating point renders as an inflation many
/// orders beyond this limit rather than a hard singularity.
const BIAS_INFLATION_LIMIT: f64 = 1e12;

/// Result of a maximum-likelihood scale fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    /// Estimated metric scale factor.
    pub scale: f64,
    /// `100 * (scale - 1)`: percent deviation from unit scale.
    pub scale_error_percent: f64,
    /// RMS of the specific-force residual components at the solution, m/s^2.
    pub residual_std: f64,
    /// Lower bound on the estimator's standard deviation. The bound that
    /// applies to a sampled-measurement estimator is the discrete one,
    /// `sigma_a / sqrt(sum_k |vdot_k|^2)` (with the bias-estimating variant
    /// reading the scale entry of the inverse normal matrix); the
    /// time-integral of the information rate describes the trajectory rather
    /// than the sample set and is off by a factor of `sqrt(rate)` as a
    /// variance bound.
    pub crlb_std: f64,
    /// Whether the optimizer met [`CONVERGENCE_STEP`] with a positive scale.
    pub converged: bool,
    /// Gauss-Newton iterations executed.
    pub iterations: usize,
}

/// Maximum-likelihood scale estimate from time-aligned up-to-scale
/// kinematics and IMU measurements.
///
/// Minimizes `sum_k |f_k - R_k^T (s * vdot_k - g) - b_a|^2 / sigma_a^2` over
/// `s`, and over `b_a` as well when `estimate_accel_bias` is set (the
/// default off matches a calibrated sensor; turning it on costs information
/// and is degenerate for motions whose body-frame acceleration is constant,
/// such as a steady circle). The residual is linear in the parameters, so
/// Gauss-Newton lands on the optimum in one step and the second confirms
/// convergence.
pub fn estimate_scale_ml(
    mono_kinematics: &[KinematicSample],
    imu: &[ImuSample],
    noise: &NoiseModel,
    gravity: &GravityModel,
    estimate_accel_bias: bool,
) -> Result<ScaleEstimate> {
    if mono_kinematics.len() != imu.len() {
        return Err(Error::invalid(
            "scale estimation",
            format!(
                "kinematics has {} samples but the IMU series has {}",
                mono_kinematics.len(),
                imu.len()
            ),
        ));
    }
    noise.validate()?;
    for (index, (kin, meas)) in mono_kinematics.iter().zip(imu).enumerate() {
        if (kin.timestamp - meas.timestamp).abs() > 1e-9 {
            return Err(Error::TimestampMismatch {
                index,
                left: kin.timestamp,
                right: meas.timestamp,
            });
        }
    }

    let (sigma_a, _) = noise.per_sample_noise_std();
    // Gate on the time-integrated information before fitting anything. In
    // the noiseless limit any acceleration at all is infinitely informative
    // while none remains unobservable at every noise level.
    let information = if sigma_a > 0.0 {
        fisher_total(mono_kinematics, sigma_a)?.total
    } else if fisher_total(mono_kinematics, 1.0)?.total > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if information < UNOBSERVABLE_INFORMATION {
        return Err(Error::ScaleUnobservable {
            information,
            threshold: UNOBSERVABLE_INFORMATION,
        });
    }

    // Per-sample constants of the residual model
    // r_k = f_k + R_k^T g - s * (R_k^T vdot_k) - b_a.
    let g = gravity.vector();
    let directions: Vec<Vec3> = mono_kinematics
        .iter()
        .map(|k| k.rotation.inverse_transform(k.acceleration_world))
        .collect();
    let offsets: Vec<Vec3> = mono_kinematics
        .iter()
        .zip(imu)
        .map(|(k, m)| m.specific_force_body + k.rotation.inverse_transform(g))
        .collect();
    let sum_dir_sq: f64 = directions.iter().map(|d| d.norm_squared()).sum();

    // Normal matrix of the joint scale-and-bias problem; the residual is
    // linear in both, so it never changes across iterations.
    let bias_inverse = if estimate_accel_bias {
        let n = directions.len() as f64;
        let sum_dir = directions.iter().fold(Vec3::zeros(), |acc, d| acc + d);
        let mut normal = Matrix4::zeros();
        normal[(0, 0)] = sum_dir_sq;
        for i in 0..3 {
            normal[(0, i + 1)] = sum_dir[i];
            normal[(i + 1, 0)] = sum_dir[i];
            normal[(i + 1, i + 1)] = n;
        }
        let inverse = normal
            .cholesky()
            .map(|factor| factor.inverse())
            .filter(|inv| inv[(0, 0)] > 0.0 && inv[(0, 0)] * sum_dir_sq <= BIAS_INFLATION_LIMIT);
        match inverse {
            Some(inv) => Some(inv),
            None => {
                return Err(Error::DegenerateRegression {
                    reason: "scale and accelerometer bias are indistinguishable for this motion"
                        .to_string(),
                })
            }
        }
    } else {
        None
    };

    let mut scale = 1.0;
    let mut bias = Vec3::zeros();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let step = if let Some(inverse) = &bias_inverse {
            let mut rhs = Vector4::zeros();
            for (d, o) in directions.iter().zip(&offsets) {
                let r = o - d * scale - bias;
                rhs[0] += d.dot(&r);
                rhs[1] += r.x;
                rhs[2] += r.y;
                rhs[3] += r.z;
            }
            let delta = inverse * rhs;
            scale += delta[0];
            bias += Vec3::new(delta[1], delta[2], delta[3]);
            delta.amax()
        } else {
            let num: f64 = directions
                .iter()
                .zip(&offsets)
                .map(|(d, o)| d.dot(&(o - d * scale)))
                .sum();
            let delta = num / sum_dir_sq;
            scale += delta;
            delta.abs()
        };
        if !scale.is_finite() || scale.abs() > 1e6 {
            return Err(Error::NoConvergence {
                iterations,
                last_step: step,
            });
        }
        if step < CONVERGENCE_STEP {
            converged = true;
            break;
        }
    }
    // A non-positive optimum means the data contradicts any physical scale.
    if scale <= 0.0 {
        converged = false;
    }

    let residual_sq: f64 = directions
        .iter()
        .zip(&offsets)
        .map(|(d, o)| (o - d * scale - bias).norm_squared())
        .sum();
    let residual_std = (residual_sq / (3.0 * directions.len() as f64)).sqrt();

    let crlb_std = match &bias_inverse {
        Some(inverse) => sigma_a * inverse[(0, 0)].sqrt(),
        None => sigma_a / sum_dir_sq.sqrt(),
    };

    Ok(ScaleEstimate {
        scale,
        scale_error_percent: 100.0 * (scale - 1.0),
        residual_std,
        crlb_std,
        converged,
        iterations,
    })
}

/// Slope and residual scatter of estimated versus true cumulative distance.
///
/// Fits `estimated = scale * truth + intercept` by ordinary least squares
/// and returns `(scale, sigma_d)` where `sigma_d` is the standard deviation
/// of the fit residuals in meters. Exactly proportional inputs give the
/// proportionality factor and zero scatter regardless of the intercept term.
pub fn estimate_scale_regression(
    estimated_distances: &[f64],
    truth_distances: &[f64],
) -> Result<(f64, f64)> {
    if estimated_distances.len() != truth_distances.len() {
        return Err(Error::invalid(
            "distance regression",
            format!(
                "{} estimated vs {} truth distances",
                estimated_distances.len(),
                truth_distances.len()
            ),
        ));
    }
    let n = truth_distances.len();
    if n < 2 {
        return Err(Error::TooFewSamples {
            context: "distance regression",
            required: 2,
            actual: n,
        });
    }
    let mean_t = truth_distances.iter().sum::<f64>() / n as f64;
    let mean_e = estimated_distances.iter().sum::<f64>() / n as f64;
    let mut var_t = 0.0;
    let mut cov = 0.0;
    for (t, e) in truth_distances.iter().zip(estimated_distances) {
        var_t += (t - mean_t) * (t - mean_t);
        cov += (t - mean_t) * (e - mean_e);
    }
    if var_t <= 0.0 {
        return Err(Error::DegenerateRegression {
            reason: "truth distances are all equal; the slope is undefined".to_string(),
        });
    }
    let scale = cov / var_t;
    let intercept = mean_e - scale * mean_t;
    let residual_sq: f64 = truth_distances
        .iter()
        .zip(estimated_distances)
        .map(|(t, e)| {
            let r = e - (scale * t + intercept);
            r * r
        })
        .sum();
    let sigma_d = (residual_sq / n as f64).sqrt();
    Ok((scale, sigma_d))
}

/// Scale regressed over growing prefixes of a distance-pair log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningScaleSeries {
    /// `(distance_traveled_m, scale)` per prefix, distance nondecreasing.
    pub points: Vec<(f64, f64)>,
}

/// Fewest distance pairs a running-scale prefix regression uses.
pub const MIN_RUNNING_POINTS: usize = 4;

/// Running scale over traveled distance: one regression per prefix of the
/// pair log, starting at [`MIN_RUNNING_POINTS`] pairs. The last entry uses
/// every pair and therefore equals [`estimate_scale_regression`] exactly.
pub fn running_scale(
    estimated_distances: &[f64],
    truth_distances: &[f64],
) -> Result<RunningScaleSeries> {
    if estimated_distances.len() != truth_distances.len() {
        return Err(Error::invalid(
            "running scale",
            format!(
                "{} estimated vs {} truth distances",
                estimated_distances.len(),
                truth_distances.len()
            ),
        ));
    }
    if truth_distances.len() < MIN_RUNNING_POINTS {
        return Err(Error::TooFewSamples {
            context: "running scale",
            required: MIN_RUNNING_POINTS,
            actual: truth_distances.len(),
        });
    }
    if truth_distances.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(
            "running scale",
            "truth distances must be nondecreasing".to_string(),
        ));
    }
    let mut points = Vec::with_capacity(truth_distances.len() - MIN_RUNNING_POINTS + 1);
    for end in MIN_RUNNING_POINTS..=truth_distances.len() {
        let (scale, _) =
            estimate_scale_regression(&estimated_distances[..end], &truth_distances[..end])?;
        points.push((truth_distances[end - 1], scale));
    }
    Ok(RunningScaleSeries { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imusim::{apply_scale, synthesize};
    use crate::trajgen::{generate, TrajectoryKind, TrajectorySpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn benchmark(kind: TrajectoryKind) -> Vec<KinematicSample> {
        generate(&TrajectorySpec::benchmark(kind)).unwrap()
    }

    fn noise_free_setup(
        kind: TrajectoryKind,
        s_true: f64,
    ) -> (Vec<KinematicSample>, Vec<ImuSample>) {
        let truth = benchmark(kind);
        let mono = apply_scale(&truth, 1.0 / s_true).unwrap();
        let (imu, _) = synthesize(
            &truth,
            &NoiseModel::zero(33.0),
            &GravityModel::default(),
            Vec3::zeros(),
            Vec3::zeros(),
            0,
        )
        .unwrap();
        (mono, imu)
    }

    #[test]
    fn noise_free_scaled_input_inverts_exactly() {
        let (mono, imu) = noise_free_setup(TrajectoryKind::FigureEight, 2.0);
        let est = estimate_scale_ml(
            &mono,
            &imu,
            &NoiseModel::default(),
            &GravityModel::default(),
            false,
        )
        .unwrap();
        assert!(est.converged);
        assert!((est.scale - 2.0).abs() < 1e-9, "scale {}", est.scale);
        assert!(est.residual_std < 1e-9);
        assert_eq!(est.scale_error_percent, 100.0 * (est.scale - 1.0));
        assert!(est.iterations <= 3);
    }

    #[test]
    fn consistency_holds_for_any_informative_trajectory_and_scale() {
        for kind in [TrajectoryKind::Circle, TrajectoryKind::FigureEight] {
            for s_true in [0.5, 1.0, 3.0] {
                let (mono, imu) = noise_free_setup(kind, s_true);
                let est = estimate_scale_ml(
                    &mono,
                    &imu,
                    &NoiseModel::default(),
                    &GravityModel::default(),
                    false,
                )
                .unwrap();
                assert!(
                    (est.scale - s_true).abs() < 1e-9,
                    "{kind:?} at {s_true}: got {}",
                    est.scale
                );
            }
        }
    }

    #[test]
    fn straight_motion_is_reported_unobservable() {
        let (mono, imu) = noise_free_setup(TrajectoryKind::Straight, 1.0);
        let err = estimate_scale_ml(
            &mono,
            &imu,
            &NoiseModel::default(),
            &GravityModel::default(),
            false,
        )
        .unwrap_err();
        match err {
            Error::ScaleUnobservable {
                information,
                threshold,
            } => {
                assert_eq!(information, 0.0);
                assert_eq!(threshold, UNOBSERVABLE_INFORMATION);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn estimator_spread_matches_the_white_noise_bound() {
        // Pure white accelerometer noise: the Monte Carlo spread should sit
        // on the lower bound itself.
        let truth = benchmark(TrajectoryKind::FigureEight);
        let noise = NoiseModel {
            accel_random_walk: 0.0,
            gyro_random_walk: 0.0,
            ..NoiseModel::default()
        };
        let mut estimates = Vec::new();
        let mut bound = 0.0;
        for trial in 0..100u64 {
            let (imu, _) = synthesize(
                &truth,
                &noise,
                &GravityModel::default(),
                Vec3::zeros(),
                Vec3::zeros(),
                1000 + trial,
            )
            .unwrap();
            let est =
                estimate_scale_ml(&truth, &imu, &noise, &GravityModel::default(), false).unwrap();
            assert!(est.converged);
            estimates.push(est.scale);
            bound = est.crlb_std;
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let std = (estimates.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt();
        let ratio = std / bound;
        assert!(
            (0.8..=1.25).contains(&ratio),
            "std {std} vs bound {bound} (ratio {ratio})"
        );
        assert!((mean - 1.0).abs() < 4.0 * bound / n.sqrt() + 1e-4);
    }

    #[test]
    fn mismatched_series_are_rejected() {
        let (mono, imu) = noise_free_setup(TrajectoryKind::Circle, 1.0);
        assert!(estimate_scale_ml(
            &mono[..100],
            &imu,
            &NoiseModel::default(),
            &GravityModel::default(),
            false
        )
        .is_err());

        let mut shifted = imu.clone();
        shifted[40].timestamp += 0.01;
        let err = estimate_scale_ml(
            &mono,
            &shifted,
            &NoiseModel::default(),
            &GravityModel::default(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TimestampMismatch { index: 40, .. }));
    }

    #[test]
    fn noiseless_weighting_reports_a_zero_bound() {
        let (mono, imu) = noise_free_setup(TrajectoryKind::Circle, 1.0);
        let est = estimate_scale_ml(
            &mono,
            &imu,
            &NoiseModel::zero(33.0),
            &GravityModel::default(),
            false,
        )
        .unwrap();
        assert!((est.scale - 1.0).abs() < 1e-12);
        assert_eq!(est.crlb_std, 0.0);

        let (mono, imu) = noise_free_setup(TrajectoryKind::Straight, 1.0);
        let err = estimate_scale_ml(
            &mono,
            &imu,
            &NoiseModel::zero(33.0),
            &GravityModel::default(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ScaleUnobservable { .. }));
    }

    #[test]
    fn constant_turn_confounds_scale_with_accelerometer_bias() {
        // On a steady circle the body-frame acceleration never changes, so a
        // lateral bias mimics a scale change exactly.
        let (mono, imu) = noise_free_setup(TrajectoryKind::Circle, 1.0);
        let err = estimate_scale_ml(
            &mono,
            &imu,
            &NoiseModel::default(),
            &GravityModel::default(),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateRegression { .. }));
    }

    #[test]
    fn bias_estimation_absorbs_an_injected_constant_bias() {
        let truth = benchmark(TrajectoryKind::FigureEight);
        let injected = Vec3::new(3e-3, -2e-3, 1e-3);
        let (imu, _) = synthesize(
            &truth,
            &NoiseModel::zero(33.0),
            &GravityModel::default(),
            Vec3::zeros(),
            injected,
            0,
        )
        .unwrap();
        let noise = NoiseModel::default();
        let gravity = GravityModel::default();

        // The figure-eight's lateral acceleration flips sign, so a constant
        // bias decorrelates from the scale: it barely pulls the estimate but
        // cannot be explained away, leaving bias-sized residuals behind.
        let ignoring = estimate_scale_ml(&truth, &imu, &noise, &gravity, false).unwrap();
        assert!(
            ignoring.residual_std > 1e-3,
            "unmodeled bias should show up in the residuals, got {}",
            ignoring.residual_std
        );

        let fitting = estimate_scale_ml(&truth, &imu, &noise, &gravity, true).unwrap();
        assert!((fitting.scale - 1.0).abs() < 1e-9, "scale {}", fitting.scale);
        assert!(fitting.residual_std < 1e-9);
        // Over the balanced full circuit the nuisance costs almost nothing,
        // and it must never look cheaper than not estimating it.
        assert!(fitting.crlb_std >= ignoring.crlb_std * (1.0 - 1e-12));

        // Half a circuit keeps the lateral acceleration one-sided, so there
        // the bias genuinely competes with the scale for information.
        let half = truth.len() / 2;
        let plain_half =
            estimate_scale_ml(&truth[..half], &imu[..half], &noise, &gravity, false).unwrap();
        let joint_half =
            estimate_scale_ml(&truth[..half], &imu[..half], &noise, &gravity, true).unwrap();
        assert!(
            joint_half.crlb_std > 1.2 * plain_half.crlb_std,
            "expected a visible information cost, got {} vs {}",
            joint_half.crlb_std,
            plain_half.crlb_std
        );
    }

    #[test]
    fn exact_proportional_distances_regress_to_the_factor() {
        let truth: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
        let estimated: Vec<f64> = truth.iter().map(|d| 1.092 * d).collect();
        let (scale, sigma_d) = estimate_scale_regression(&estimated, &truth).unwrap();
        assert!((scale - 1.092).abs() < 1e-12, "scale {scale}");
        assert!(sigma_d < 1e-12);

        let (unit, _) = estimate_scale_regression(&truth, &truth).unwrap();
        assert!((unit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_distances_recover_slope_and_scatter() {
        let truth: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise_std = 0.0014; // 0.14 cm in meters
        let estimated: Vec<f64> = truth
            .iter()
            .map(|d| 1.048 * d + rng.sample::<f64, _>(StandardNormal) * noise_std)
            .collect();
        let (scale, sigma_d) = estimate_scale_regression(&estimated, &truth).unwrap();
        assert!((scale - 1.048).abs() < 0.005, "scale {scale}");
        assert_relative_eq!(sigma_d, noise_std, max_relative = 0.25);
    }

    #[test]
    fn degenerate_regressions_are_rejected() {
        assert!(estimate_scale_regression(&[1.0, 2.0], &[3.0]).is_err());
        assert!(estimate_scale_regression(&[1.0], &[1.0]).is_err());
        let err = estimate_scale_regression(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateRegression { .. }));
    }

    #[test]
    fn slope_is_invariant_to_uniform_subsampling() {
        let truth: Vec<f64> = (1..=90).map(|i| 0.03 * i as f64).collect();
        let estimated: Vec<f64> = truth.iter().map(|d| 1.092 * d).collect();
        let (full, _) = estimate_scale_regression(&estimated, &truth).unwrap();
        let sub_t: Vec<f64> = truth.iter().step_by(3).copied().collect();
        let sub_e: Vec<f64> = estimated.iter().step_by(3).copied().collect();
        let (sub, _) = estimate_scale_regression(&sub_e, &sub_t).unwrap();
        assert_relative_eq!(full, sub, epsilon = 1e-12);
    }

    #[test]
    fn proportional_running_scale_is_constant_and_ends_at_the_full_fit() {
        let truth: Vec<f64> = (1..=30).map(|i| 0.1 * i as f64).collect();
        let estimated: Vec<f64> = truth.iter().map(|d| 0.93 * d).collect();
        let series = running_scale(&estimated, &truth).unwrap();
        assert_eq!(series.points.len(), truth.len() - MIN_RUNNING_POINTS + 1);
        for (d, s) in &series.points {
            assert!((s - 0.93).abs() < 1e-12, "at distance {d}: {s}");
        }
        let (full, _) = estimate_scale_regression(&estimated, &truth).unwrap();
        assert_eq!(series.points.last().unwrap().1, full);
        assert!(series
            .points
            .windows(2)
            .all(|w| w[1].0 >= w[0].0));
    }

    #[test]
    fn early_noise_washes_out_of_the_running_scale() {
        let truth: Vec<f64> = (1..=60).map(|i| 0.05 * i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let estimated: Vec<f64> = truth
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let noise = if i < 10 {
                    rng.sample::<f64, _>(StandardNormal) * 0.01
                } else {
                    0.0
                };
                1.05 * d + noise
            })
            .collect();
        let series = running_scale(&estimated, &truth).unwrap();
        let (full, _) = estimate_scale_regression(&estimated, &truth).unwrap();
        assert_eq!(series.points.last().unwrap().1, full);
        let early_dev = (series.points[2].1 - full).abs();
        let late_dev = (series.points[series.points.len() - 5].1 - full).abs();
        assert!(
            late_dev < early_dev,
            "late deviation {late_dev} should be below early {early_dev}"
        );
    }

    #[test]
    fn running_scale_validates_input() {
        assert!(running_scale(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err()); // too few
        assert!(running_scale(&[1.0; 5], &[1.0, 2.0, 1.5, 2.5, 3.0]).is_err()); // not monotone
    }
}
