//! Local observability analysis of the scale-augmented navigation state.
//!
//! The state under study stacks attitude, velocity, position, both IMU
//! biases and a set of landmarks:
//! `[dtheta(3), dv(3), dp(3), db_g(3), db_a(3), dl_1(3), ..., dl_L(3)]`.
//! A segment of noise-free IMU signals is integrated from a perturbed
//! initial state, each landmark is projected to a unit bearing in the body
//! frame at every sample, and the Jacobian `J` of all stacked bearings with
//! respect to the initial state is formed by central finite differences.
//! The Gramian `G = J^T J` then exposes which directions the segment leaves
//! unobservable: its numerical nullspace always contains global translation
//! and yaw about gravity, and grows to include the similarity (scale)
//! direction exactly when the trajectory stops accelerating.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::imusim::{exact_measurements, initial_state, integrate, ImuSample};
use crate::math::{Rot3, Vec3};
use crate::trajgen::{check_monotone, KinematicSample};
use crate::types::{GravityModel, NavState};
use crate::{Error, Result};

/// Size of the non-landmark part of the augmented state.
pub const BASE_STATE_DIM: usize = 15;

/// Configuration of the Gramian construction and rank decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityConfig {
    /// World-frame landmark positions, m. At least three, not collinear.
    pub landmark_positions: Vec<Vec3>,
    /// Number of leading segment samples the Gramian integrates over.
    pub window_samples: usize,
    /// Finite-difference perturbation applied to each state coordinate.
    pub fd_step: f64,
    /// Relative singular-value cutoff separating rank from nullspace.
    pub rank_tolerance: f64,
    /// Gravity used when propagating perturbed states.
    pub gravity: GravityModel,
}

impl ObservabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.landmark_positions.len() < 3 {
            return Err(Error::invalid(
                "observability config",
                format!(
                    "need at least 3 landmarks, got {}",
                    self.landmark_positions.len()
                ),
            ));
        }
        if !self
            .landmark_positions
            .iter()
            .all(|l| l.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(
                "observability config",
                "landmark positions must be finite".to_string(),
            ));
        }
        if collinear(&self.landmark_positions) {
            return Err(Error::invalid(
                "observability config",
                "landmarks are collinear; bearings cannot constrain the state".to_string(),
            ));
        }
        if self.window_samples < 2 {
            return Err(Error::invalid(
                "observability config",
                format!("window_samples must be at least 2, got {}", self.window_samples),
            ));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::invalid(
                "observability config",
                format!("fd_step must be positive, got {}", self.fd_step),
            ));
        }
        if !(self.rank_tolerance > 0.0 && self.rank_tolerance < 1.0) {
            return Err(Error::invalid(
                "observability config",
                format!("rank_tolerance must lie in (0, 1), got {}", self.rank_tolerance),
            ));
        }
        Ok(())
    }

    /// Augmented state dimension for this landmark set.
    pub fn state_dimension(&self) -> usize {
        BASE_STATE_DIM + 3 * self.landmark_positions.len()
    }
}

impl Default for ObservabilityConfig {
    /// Six landmarks on a 2 m ring at varied heights, a 10 s window at
    /// 33 Hz, and conservative numerical settings.
    fn default() -> Self {
        ObservabilityConfig {
            landmark_positions: landmark_ring(6, 2.0),
            window_samples: 331,
            fd_step: 1e-6,
            rank_tolerance: 1e-8,
            gravity: GravityModel::default(),
        }
    }
}

/// Heights cycled through by [`landmark_ring`], m.
const RING_HEIGHTS: [f64; 6] = [-0.6, -0.2, 0.2, 0.6, -0.4, 0.4];

/// `count` landmarks spread evenly on a horizontal ring of the given radius,
/// staggered in height so that any three of them are non-collinear.
pub fn landmark_ring(count: usize, radius: f64) -> Vec<Vec3> {
    (0..count)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / count as f64;
            Vec3::new(
                radius * angle.cos(),
                radius * angle.sin(),
                RING_HEIGHTS[i % RING_HEIGHTS.len()],
            )
        })
        .collect()
}

fn collinear(points: &[Vec3]) -> bool {
    let origin = points[0];
    let Some(baseline) = points
        .iter()
        .map(|p| p - origin)
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
    else {
        return true;
    };
    if baseline.norm() < 1e-12 {
        return true; // all coincident
    }
    points
        .iter()
        .all(|p| (p - origin).cross(&baseline).norm() <= 1e-12 * baseline.norm_squared())
}

/// Rank and nullspace structure of an observability Gramian.
///
/// Rank statements are about the stacked measurement Jacobian `J`, so the
/// report carries `J`'s singular values, the square roots of the Gramian's
/// eigenvalues. Squaring them would stretch the spectrum and make a relative
/// rank cutoff unusable: weakly observed directions would fall below the
/// same threshold that separates the exact symmetries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Augmented state dimension (15 plus three per landmark).
    pub state_dimension: usize,
    /// Count of singular values at or above `rank_tolerance` times the largest.
    pub numerical_rank: usize,
    pub nullspace_dimension: usize,
    /// Trailing right singular vectors, one column per nullspace direction.
    pub nullspace_basis: DMatrix<f64>,
    /// Singular values of the measurement stack, nonincreasing.
    pub singular_values: Vec<f64>,
    /// `|G d| / sigma_max` for the similarity direction `d`: effectively zero
    /// when scale is unobservable, large when the motion excites it.
    pub scale_direction_residual: f64,
}

/// Unit similarity direction at a given state: scaling the world stretches
/// velocity, position and every landmark together while attitude and biases
/// stay fixed, giving `[0; v; p; 0; 0; l_1; ...; l_L]` normalized.
pub fn scale_direction(initial: &NavState, landmarks: &[Vec3]) -> Result<DVector<f64>> {
    let n = BASE_STATE_DIM + 3 * landmarks.len();
    let mut d = DVector::zeros(n);
    set_block(&mut d, 3, initial.velocity_world);
    set_block(&mut d, 6, initial.position_world);
    for (j, l) in landmarks.iter().enumerate() {
        set_block(&mut d, BASE_STATE_DIM + 3 * j, *l);
    }
    let norm = d.norm();
    if norm <= 0.0 {
        return Err(Error::invalid(
            "scale direction",
            "state and landmarks are all at the origin; the similarity direction vanishes"
                .to_string(),
        ));
    }
    Ok(d / norm)
}

/// Unit direction of a rigid yaw of the whole scene about gravity:
/// `[g_hat; g_hat x v; g_hat x p; 0; 0; g_hat x l_1; ...]` normalized.
pub fn yaw_direction(initial: &NavState, landmarks: &[Vec3], gravity: &GravityModel) -> DVector<f64> {
    let g_hat = -gravity.vector().normalize();
    let n = BASE_STATE_DIM + 3 * landmarks.len();
    let mut d = DVector::zeros(n);
    set_block(&mut d, 0, g_hat);
    set_block(&mut d, 3, g_hat.cross(&initial.velocity_world));
    set_block(&mut d, 6, g_hat.cross(&initial.position_world));
    for (j, l) in landmarks.iter().enumerate() {
        set_block(&mut d, BASE_STATE_DIM + 3 * j, g_hat.cross(l));
    }
    let norm = d.norm();
    d / norm
}

/// Unit direction of a rigid translation of the whole scene along `axis`.
pub fn translation_direction(axis: Vec3, landmark_count: usize) -> Result<DVector<f64>> {
    let norm = axis.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid(
            "translation direction",
            format!("axis must be nonzero and finite, got {axis:?}"),
        ));
    }
    let u = axis / norm;
    let n = BASE_STATE_DIM + 3 * landmark_count;
    let mut d = DVector::zeros(n);
    set_block(&mut d, 6, u);
    for j in 0..landmark_count {
        set_block(&mut d, BASE_STATE_DIM + 3 * j, u);
    }
    Ok(d.normalize())
}

fn set_block(v: &mut DVector<f64>, offset: usize, value: Vec3) {
    v[offset] = value.x;
    v[offset + 1] = value.y;
    v[offset + 2] = value.z;
}

/// One perturbed copy of the initial state and landmark set; coordinate `i`
/// follows the augmented-state layout, rotation perturbations acting on the
/// left (`R' = exp(dtheta) R`).
fn perturb(
    initial: &NavState,
    landmarks: &[Vec3],
    coordinate: usize,
    step: f64,
) -> (NavState, Vec<Vec3>) {
    let mut state = *initial;
    let mut marks = landmarks.to_vec();
    let axis = match coordinate % 3 {
        0 => Vec3::x(),
        1 => Vec3::y(),
        _ => Vec3::z(),
    } * step;
    match coordinate / 3 {
        0 => state.rotation = Rot3::exp(axis) * state.rotation,
        1 => state.velocity_world += axis,
        2 => state.position_world += axis,
        3 => state.gyro_bias += axis,
        4 => state.accel_bias += axis,
        block => marks[block - 5] += axis,
    }
    (state, marks)
}

/// All stacked unit bearings produced by integrating `imu` from `initial`
/// and observing `landmarks` at every sample.
fn measurement_flow(
    imu: &[ImuSample],
    initial: &NavState,
    landmarks: &[Vec3],
    gravity: &GravityModel,
) -> Result<DVector<f64>> {
    let states = integrate(imu, initial, gravity)?;
    let mut out = DVector::zeros(states.len() * landmarks.len() * 3);
    let mut row = 0;
    for state in &states {
        for landmark in landmarks {
            let relative = state
                .rotation
                .inverse_transform(landmark - state.position_world);
            let range = relative.norm();
            if range < 1e-9 {
                return Err(Error::invalid(
                    "observability window",
                    "trajectory passes through a landmark; bearing undefined".to_string(),
                ));
            }
            set_block_rows(&mut out, row, relative / range);
            row += 3;
        }
    }
    Ok(out)
}

fn set_block_rows(v: &mut DVector<f64>, offset: usize, value: Vec3) {
    v[offset] = value.x;
    v[offset + 1] = value.y;
    v[offset + 2] = value.z;
}

/// Observability Gramian `J^T J` of the bearing measurement flow over the
/// first `config.window_samples` entries of `kinematics`.
///
/// The segment's noise-free IMU signals are held fixed while the initial
/// augmented state is perturbed coordinate by coordinate; each Jacobian
/// column is a central finite difference of the stacked bearings.
pub fn build_gramian(
    kinematics: &[KinematicSample],
    config: &ObservabilityConfig,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    if kinematics.len() < config.window_samples {
        return Err(Error::TooFewSamples {
            context: "observability window",
            required: config.window_samples,
            actual: kinematics.len(),
        });
    }
    let window = &kinematics[..config.window_samples];
    check_monotone(window)?;

    let g = config.gravity.vector();
    let imu: Vec<ImuSample> = window
        .iter()
        .map(|s| {
            let (omega, force) = exact_measurements(s, g);
            ImuSample {
                timestamp: s.timestamp,
                angular_velocity_body: omega,
                specific_force_body: force,
            }
        })
        .collect();
    let initial = initial_state(&window[0]);
    let landmarks = &config.landmark_positions;

    let n = config.state_dimension();
    let rows = window.len() * landmarks.len() * 3;
    let mut jacobian = DMatrix::zeros(rows, n);
    for i in 0..n {
        let (state_plus, marks_plus) = perturb(&initial, landmarks, i, config.fd_step);
        let (state_minus, marks_minus) = perturb(&initial, landmarks, i, -config.fd_step);
        let plus = measurement_flow(&imu, &state_plus, &marks_plus, &config.gravity)?;
        let minus = measurement_flow(&imu, &state_minus, &marks_minus, &config.gravity)?;
        jacobian.set_column(i, &((plus - minus) / (2.0 * config.fd_step)));
    }
    Ok(jacobian.tr_mul(&jacobian))
}

/// Singular-value analysis of a Gramian: numerical rank, nullspace basis and
/// the residual of the similarity direction at `initial`.
pub fn rank_report(
    gramian: &DMatrix<f64>,
    config: &ObservabilityConfig,
    initial: &NavState,
) -> Result<RankReport> {
    config.validate()?;
    let n = config.state_dimension();
    if gramian.nrows() != n || gramian.ncols() != n {
        return Err(Error::invalid(
            "rank analysis",
            format!(
                "gramian is {}x{} but the config implies dimension {n}",
                gramian.nrows(),
                gramian.ncols()
            ),
        ));
    }
    if !gramian.iter().all(|x| x.is_finite()) {
        return Err(Error::DegenerateMatrix {
            reason: "gramian has non-finite entries".to_string(),
        });
    }
    let scale = gramian.amax();
    if scale <= 0.0 {
        return Err(Error::DegenerateMatrix {
            reason: "gramian is identically zero".to_string(),
        });
    }
    if (gramian - gramian.transpose()).amax() > 1e-9 * scale {
        return Err(Error::DegenerateMatrix {
            reason: "gramian is not symmetric".to_string(),
        });
    }

    let svd = gramian.clone().svd(true, true);
    // Eigenvalues of G = J^T J are the squared singular values of J.
    let singular_values: Vec<f64> = svd.singular_values.iter().map(|s| s.sqrt()).collect();
    debug_assert!(singular_values.windows(2).all(|w| w[0] >= w[1]));
    let sigma_max = singular_values[0];
    let numerical_rank = singular_values
        .iter()
        .filter(|s| **s >= config.rank_tolerance * sigma_max)
        .count();
    let nullspace_dimension = n - numerical_rank;
    let v_t = svd.v_t.expect("requested right singular vectors");
    let nullspace_basis = v_t.rows(numerical_rank, nullspace_dimension).transpose();

    let d = scale_direction(initial, &config.landmark_positions)?;
    let scale_direction_residual = (gramian * d).norm() / sigma_max;

    Ok(RankReport {
        state_dimension: n,
        numerical_rank,
        nullspace_dimension,
        nullspace_basis,
        singular_values,
        scale_direction_residual,
    })
}
