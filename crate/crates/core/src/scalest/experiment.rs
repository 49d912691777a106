//! Monte Carlo experiment driver tying the whole pipeline together.
//!
//! One experiment sweeps a set of trajectory kinds with a shared motion and
//! noise configuration. Per kind it generates the reference motion, shrinks
//! it by the true scale to play the role of an up-to-scale reconstruction,
//! synthesizes noisy IMU runs, and estimates the scale per run. The per-kind
//! summary records estimate statistics alongside excitation and information
//! measures; the first trial additionally logs the distance-pair protocol
//! (running scale over traveled distance and the final distance regression).
//! Everything is seeded, so a rerun of the same config reproduces the report
//! bit for bit.

use serde::{Deserialize, Serialize};

use crate::excitation::{excitation_index, fisher_total};
use crate::imusim::{apply_scale, synthesize, ImuSample};
use crate::math::Vec3;
use crate::scalest::{
    estimate_scale_ml, estimate_scale_regression, running_scale, RunningScaleSeries,
    MIN_RUNNING_POINTS, UNOBSERVABLE_INFORMATION,
};
use crate::trajgen::{generate, KinematicSample, TrajectoryKind, TrajectorySpec};
use crate::types::{GravityModel, NoiseModel};
use crate::{Error, Result};

/// Rate at which the first trial's running-scale protocol checkpoints the
/// estimate, Hz.
pub const RUNNING_CHECKPOINT_HZ: f64 = 2.0;

/// Full parameterization of one Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Trajectory kinds to sweep, in output order.
    pub kinds: Vec<TrajectoryKind>,
    /// Constant speed along the path, m/s.
    pub speed: f64,
    /// Total arc length per run, m.
    pub path_length: f64,
    /// Run duration, s.
    pub duration: f64,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
    /// Circle radius or figure-eight half-width, m; `None` picks the shape
    /// that closes after exactly `path_length`.
    pub shape_param: Option<f64>,
    /// IMU noise used for synthesis and likelihood weighting.
    pub noise: NoiseModel,
    pub gravity: GravityModel,
    /// True metric scale: the reconstruction handed to the estimator is the
    /// reference motion scaled by `1 / s_true`.
    pub s_true: f64,
    /// Monte Carlo trials per trajectory kind.
    pub trials: usize,
    /// Base seed; per-trial seeds are derived with [`derive_seed`].
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kinds: TrajectoryKind::ALL.to_vec(),
            speed: 0.1,
            path_length: 3.0,
            duration: 30.0,
            sample_rate: 33.0,
            shape_param: None,
            noise: NoiseModel::default(),
            gravity: GravityModel::default(),
            s_true: 1.0,
            trials: 200,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() {
            return Err(Error::invalid(
                "experiment config",
                "kinds must name at least one trajectory".to_string(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid(
                "experiment config",
                "trials must be at least 1".to_string(),
            ));
        }
        if !(self.s_true.is_finite() && self.s_true > 0.0) {
            return Err(Error::invalid(
                "experiment config",
                format!("s_true must be a positive finite number, got {}", self.s_true),
            ));
        }
        self.noise.validate()?;
        if (self.noise.sample_rate - self.sample_rate).abs() > 1e-9 {
            return Err(Error::invalid(
                "experiment config",
                format!(
                    "noise model sample rate {} disagrees with the trajectory rate {}",
                    self.noise.sample_rate, self.sample_rate
                ),
            ));
        }
        for &kind in &self.kinds {
            self.spec_for(kind)?;
        }
        Ok(())
    }

    fn spec_for(&self, kind: TrajectoryKind) -> Result<TrajectorySpec> {
        let mut spec =
            TrajectorySpec::new(kind, self.speed, self.path_length, self.duration, self.sample_rate)?;
        spec.shape_param = self.shape_param;
        spec.validate()?;
        Ok(spec)
    }
}

/// Final distance-pair regression of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRegression {
    /// Slope of corrected estimated distance against true distance.
    pub scale: f64,
    /// Standard deviation of the fit residuals, m.
    pub sigma_d: f64,
}

/// Per-trajectory summary of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub trajectory: TrajectoryKind,
    /// Trials attempted (equals the config's trial count).
    pub trials: usize,
    /// Trials rejected by the information gate.
    pub unobservable_trials: usize,
    /// Trials whose optimizer failed to converge.
    pub diverged_trials: usize,
    /// Mean estimated scale over converged trials; `None` if none converged.
    pub mean_scale: Option<f64>,
    /// Population standard deviation of the estimated scale.
    pub std_scale: Option<f64>,
    /// Mean absolute deviation of the estimate from the true scale.
    pub mean_abs_error: Option<f64>,
    /// Trial-averaged yaw-rate spread, rad/s.
    pub mean_sigma_yaw_rate: f64,
    /// Trial-averaged lateral specific-force spread, m/s^2.
    pub mean_sigma_lateral_accel: f64,
    /// Trial-averaged excitation index.
    pub mean_excitation: f64,
    /// Time-integrated scale information of the noise-free reconstruction;
    /// infinite under a zero-noise config (serialized as "infinite").
    #[serde(with = "information_total")]
    pub fisher_total: f64,
    /// Estimator lower bound, identical across trials; `None` when the
    /// motion carries no scale information (serialized as "unobservable").
    #[serde(with = "maybe_unobservable")]
    pub crlb_std: Option<f64>,
    /// First-trial distance regression; `None` when too few checkpoints
    /// passed the information gate.
    pub regression: Option<DistanceRegression>,
    /// First-trial running scale over traveled distance.
    pub running: Option<RunningScaleSeries>,
}

/// Everything [`run_experiment`] produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrajectoryOutcome>,
}

/// Serializes `Option<f64>` with `None` spelled `"unobservable"`, the
/// distinguished value used for bounds that do not exist.
pub mod maybe_unobservable {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(x) => ser.serialize_f64(*x),
            None => ser.serialize_str("unobservable"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Tag(String),
        }
        match Repr::deserialize(de)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Tag(tag) if tag == "unobservable" => Ok(None),
            Repr::Tag(tag) => Err(D::Error::custom(format!(
                "expected a number or \"unobservable\", got \"{tag}\""
            ))),
        }
    }
}

/// Serializes an information total that is infinite for noise-free data,
/// which plain JSON numbers cannot express.
pub mod information_total {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            ser.serialize_f64(*value)
        } else {
            ser.serialize_str("infinite")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Value(f64),
            Tag(String),
        }
        match Repr::deserialize(de)? {
            Repr::Value(x) => Ok(x),
            Repr::Tag(tag) if tag == "infinite" => Ok(f64::INFINITY),
            Repr::Tag(tag) => Err(D::Error::custom(format!(
                "expected a number or \"infinite\", got \"{tag}\""
            ))),
        }
    }
}

/// Splitmix-style seed derivation: statistically independent streams per
/// `(stream, index)` pair, stable across platforms and runs.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the full Monte Carlo sweep described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut outcomes = Vec::with_capacity(config.kinds.len());
    for (kind_index, &kind) in config.kinds.iter().enumerate() {
        let truth = generate(&config.spec_for(kind)?)?;
        let mono = apply_scale(&truth, 1.0 / config.s_true)?;
        let (sigma_a, _) = config.noise.per_sample_noise_std();
        let info = if sigma_a > 0.0 {
            fisher_total(&mono, sigma_a)?.total
        } else if fisher_total(&mono, 1.0)?.total > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };

        let mut scales = Vec::new();
        let mut unobservable_trials = 0;
        let mut diverged_trials = 0;
        let mut crlb_std = None;
        let mut sum_sigma_yaw = 0.0;
        let mut sum_sigma_lat = 0.0;
        let mut sum_excitation = 0.0;
        let mut first_trial_imu: Option<Vec<ImuSample>> = None;
        for trial in 0..config.trials {
            let seed = derive_seed(config.seed, kind_index as u64, trial as u64);
            let (imu, _) = synthesize(
                &truth,
                &config.noise,
                &config.gravity,
                Vec3::zeros(),
                Vec3::zeros(),
                seed,
            )?;
            let report = excitation_index(&imu)?;
            sum_sigma_yaw += report.sigma_yaw_rate;
            sum_sigma_lat += report.sigma_lateral_accel;
            sum_excitation += report.excitation_index;
            match estimate_scale_ml(&mono, &imu, &config.noise, &config.gravity, false) {
                Ok(est) if est.converged => {
                    scales.push(est.scale);
                    crlb_std.get_or_insert(est.crlb_std);
                }
                Ok(_) | Err(Error::NoConvergence { .. }) => diverged_trials += 1,
                Err(Error::ScaleUnobservable { .. }) => unobservable_trials += 1,
                Err(other) => return Err(other),
            }
            if trial == 0 {
                first_trial_imu = Some(imu);
            }
        }

        let (mean_scale, std_scale, mean_abs_error) = if scales.is_empty() {
            (None, None, None)
        } else {
            let n = scales.len() as f64;
            let mean = scales.iter().sum::<f64>() / n;
            let var = scales.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
            let mae = scales.iter().map(|s| (s - config.s_true).abs()).sum::<f64>() / n;
            (Some(mean), Some(var.sqrt()), Some(mae))
        };

        let (regression, running) =
            distance_protocol(&mono, &truth, first_trial_imu.as_ref().expect("trials >= 1"), config)?;

        let n_trials = config.trials as f64;
        outcomes.push(TrajectoryOutcome {
            trajectory: kind,
            trials: config.trials,
            unobservable_trials,
            diverged_trials,
            mean_scale,
            std_scale,
            mean_abs_error,
            mean_sigma_yaw_rate: sum_sigma_yaw / n_trials,
            mean_sigma_lateral_accel: sum_sigma_lat / n_trials,
            mean_excitation: sum_excitation / n_trials,
            fisher_total: info,
            crlb_std: if info >= UNOBSERVABLE_INFORMATION {
                crlb_std
            } else {
                None
            },
            regression,
            running,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        outcomes,
    })
}

/// Distance along the sampled path up to each sample.
fn cumulative_distances(kinematics: &[KinematicSample]) -> Vec<f64> {
    let mut distances = Vec::with_capacity(kinematics.len());
    let mut total = 0.0;
    for (i, sample) in kinematics.iter().enumerate() {
        if i > 0 {
            total += (sample.position_world - kinematics[i - 1].position_world).norm();
        }
        distances.push(total);
    }
    distances
}

/// Distance-pair protocol on one run: at every checkpoint the scale is
/// re-estimated from the data seen so far and the corrected traveled
/// distance is paired with the true one. Checkpoints whose prefix fails the
/// information gate are skipped, so a straight run yields no pairs at all.
fn distance_protocol(
    mono: &[KinematicSample],
    truth: &[KinematicSample],
    imu: &[ImuSample],
    config: &ExperimentConfig,
) -> Result<(Option<DistanceRegression>, Option<RunningScaleSeries>)> {
    let mono_distance = cumulative_distances(mono);
    let truth_distance = cumulative_distances(truth);
    let mut estimated = Vec::new();
    let mut reference = Vec::new();
    let stride = config.sample_rate / RUNNING_CHECKPOINT_HZ;
    let mut checkpoint = 1u64;
    loop {
        let index = (checkpoint as f64 * stride).round() as usize;
        if index >= mono.len() {
            break;
        }
        match estimate_scale_ml(
            &mono[..=index],
            &imu[..=index],
            &config.noise,
            &config.gravity,
            false,
        ) {
            Ok(est) if est.converged => {
                estimated.push(est.scale * mono_distance[index]);
                reference.push(truth_distance[index]);
            }
            Ok(_) | Err(Error::ScaleUnobservable { .. }) | Err(Error::NoConvergence { .. }) => {}
            Err(other) => return Err(other),
        }
        checkpoint += 1;
    }
    let regression = if estimated.len() >= 2 {
        let (scale, sigma_d) = estimate_scale_regression(&estimated, &reference)?;
        Some(DistanceRegression { scale, sigma_d })
    } else {
        None
    };
    let running = if estimated.len() >= MIN_RUNNING_POINTS {
        Some(running_scale(&estimated, &reference)?)
    } else {
        None
    };
    Ok((regression, running))
}
