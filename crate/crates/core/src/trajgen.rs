//! Planar constant-speed reference trajectories.
//!
//! Three families are provided: straight lines, circles and figure-eights
//! (Gerono lemniscates). All are generated in a z-up world frame at constant
//! speed, with the body x axis aligned with the velocity. Positions,
//! velocities and accelerations are evaluated analytically, so the sampled
//! kinematics are consistent to machine precision rather than to the
//! sampling resolution.

use serde::{Deserialize, Serialize};

use crate::math::{Rot3, Vec3};
use crate::{Error, Result};

/// Relative tolerance for the `speed * duration == path_length` consistency
/// check in [`TrajectorySpec::validate`].
pub const SPEC_CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Straight,
    Circle,
    #[serde(rename = "figure8")]
    FigureEight,
}

impl TrajectoryKind {
    /// Stable lower-case name used in CSV tables and CLI flags.
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Straight => "straight",
            TrajectoryKind::Circle => "circle",
            TrajectoryKind::FigureEight => "figure8",
        }
    }

    pub const ALL: [TrajectoryKind; 3] = [
        TrajectoryKind::Straight,
        TrajectoryKind::Circle,
        TrajectoryKind::FigureEight,
    ];
}

impl std::fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(TrajectoryKind::Straight),
            "circle" => Ok(TrajectoryKind::Circle),
            "figure8" | "figure_eight" => Ok(TrajectoryKind::FigureEight),
            other => Err(Error::invalid(
                "trajectory kind",
                format!("unknown kind {other:?}; expected straight, circle or figure8"),
            )),
        }
    }
}

/// Parameters of one generated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Constant speed along the path, m/s.
    pub speed: f64,
    /// Total arc length to cover, m.
    pub path_length: f64,
    /// Run duration, s.
    pub duration: f64,
    /// Sampling rate, Hz.
    pub sample_rate: f64,
    /// Circle radius or figure-eight half-width, m. `None` picks the shape
    /// whose natural period matches `path_length`: a circle of circumference
    /// `path_length`, or a lemniscate whose full circuit is `path_length`.
    pub shape_param: Option<f64>,
}

impl TrajectorySpec {
    pub fn new(
        kind: TrajectoryKind,
        speed: f64,
        path_length: f64,
        duration: f64,
        sample_rate: f64,
    ) -> Result<Self> {
        let spec = TrajectorySpec {
            kind,
            speed,
            path_length,
            duration,
            sample_rate,
            shape_param: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The benchmark profile: 3 m in 30 s at 0.1 m/s, sampled at 33 Hz.
    pub fn benchmark(kind: TrajectoryKind) -> Self {
        TrajectorySpec {
            kind,
            speed: 0.1,
            path_length: 3.0,
            duration: 30.0,
            sample_rate: 33.0,
            shape_param: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("speed", self.speed),
            ("path_length", self.path_length),
            ("duration", self.duration),
            ("sample_rate", self.sample_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    "trajectory spec",
                    format!("{name} must be positive and finite, got {v}"),
                ));
            }
        }
        let implied = self.speed * self.duration;
        let tol = SPEC_CONSISTENCY_TOL * self.path_length.max(1.0);
        if (implied - self.path_length).abs() > tol {
            return Err(Error::invalid(
                "trajectory spec",
                format!(
                    "speed * duration = {implied} must equal path_length = {} (tol {tol:.1e})",
                    self.path_length
                ),
            ));
        }
        if let Some(p) = self.shape_param {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::invalid(
                    "trajectory spec",
                    format!("shape_param must be positive and finite, got {p}"),
                ));
            }
        }
        Ok(())
    }
}

/// One sample of the reference motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    /// Time since the start of the run, s.
    pub timestamp: f64,
    pub position_world: Vec3,
    pub velocity_world: Vec3,
    pub acceleration_world: Vec3,
    /// Body-to-world rotation: x along velocity, z up.
    pub rotation: Rot3,
    /// Heading rate about world z, rad/s.
    pub yaw_rate: f64,
    /// Signed planar curvature, 1/m; positive turns left.
    pub curvature: f64,
}

/// Generates the sampled trajectory for `spec`.
///
/// Samples lie at `k / sample_rate` for `k = 0 ..= round(duration *
/// sample_rate)`, so both endpoints are included and the sampled path covers
/// the full `path_length`.
pub fn generate(spec: &TrajectorySpec) -> Result<Vec<KinematicSample>> {
    spec.validate()?;
    let steps = (spec.duration * spec.sample_rate).round() as usize;
    if steps < 1 {
        return Err(Error::invalid(
            "trajectory spec",
            format!(
                "duration {} s at {} Hz yields fewer than 2 samples",
                spec.duration, spec.sample_rate
            ),
        ));
    }
    let dt = 1.0 / spec.sample_rate;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let samples = match spec.kind {
        TrajectoryKind::Straight => generate_straight(spec, &times),
        TrajectoryKind::Circle => generate_circle(spec, &times),
        TrajectoryKind::FigureEight => generate_figure_eight(spec, &times),
    };
    Ok(samples)
}

fn planar_sample(
    timestamp: f64,
    position: Vec3,
    velocity: Vec3,
    acceleration: Vec3,
    curvature: f64,
    speed: f64,
) -> KinematicSample {
    let heading = velocity.y.atan2(velocity.x);
    KinematicSample {
        timestamp,
        position_world: position,
        velocity_world: velocity,
        acceleration_world: acceleration,
        rotation: Rot3::from_yaw(heading),
        yaw_rate: curvature * speed,
        curvature,
    }
}

fn generate_straight(spec: &TrajectorySpec, times: &[f64]) -> Vec<KinematicSample> {
    times
        .iter()
        .map(|&t| {
            planar_sample(
                t,
                Vec3::new(spec.speed * t, 0.0, 0.0),
                Vec3::new(spec.speed, 0.0, 0.0),
                Vec3::zeros(),
                0.0,
                spec.speed,
            )
        })
        .collect()
}

fn generate_circle(spec: &TrajectorySpec, times: &[f64]) -> Vec<KinematicSample> {
    // Default radius closes exactly one loop over path_length.
    let radius = spec
        .shape_param
        .unwrap_or(spec.path_length / std::f64::consts::TAU);
    let omega = spec.speed / radius;
    let v = spec.speed;
    times
        .iter()
        .map(|&t| {
            let (s, c) = (omega * t).sin_cos();
            // Starts at the origin heading +x, turning left around (0, R).
            let position = Vec3::new(radius * s, radius * (1.0 - c), 0.0);
            let velocity = Vec3::new(v * c, v * s, 0.0);
            let acceleration = Vec3::new(-v * omega * s, v * omega * c, 0.0);
            planar_sample(t, position, velocity, acceleration, 1.0 / radius, v)
        })
        .collect()
}

/// Unit Gerono lemniscate `c(u) = (sin u, sin u cos u)` and its derivatives.
mod gerono {
    /// `c(u)`.
    pub fn point(u: f64) -> (f64, f64) {
        let (s, c) = u.sin_cos();
        (s, s * c)
    }

    /// `c'(u) = (cos u, cos 2u)`.
    pub fn d1(u: f64) -> (f64, f64) {
        (u.cos(), (2.0 * u).cos())
    }

    /// `c''(u) = (-sin u, -2 sin 2u)`.
    pub fn d2(u: f64) -> (f64, f64) {
        (-u.sin(), -2.0 * (2.0 * u).sin())
    }

    /// `|c'(u)|`; bounded below by ~0.66, so the curve is regular.
    pub fn speed(u: f64) -> f64 {
        let (dx, dy) = d1(u);
        dx.hypot(dy)
    }

    /// Arc length of one circuit of the unit lemniscate.
    ///
    /// Periodic trapezoidal quadrature, which converges spectrally for
    /// smooth periodic integrands; 4096 nodes put the error far below 1e-12.
    pub fn unit_circuit_length() -> f64 {
        let n = 4096;
        let h = std::f64::consts::TAU / n as f64;
        let sum: f64 = (0..n).map(|i| speed(i as f64 * h)).sum();
        sum * h
    }
}

fn generate_figure_eight(spec: &TrajectorySpec, times: &[f64]) -> Vec<KinematicSample> {
    let unit_length = gerono::unit_circuit_length();
    // One circuit has length a * unit_length, linear in the half-width a.
    let a = spec
        .shape_param
        .unwrap_or(spec.path_length / unit_length);
    let v = spec.speed;

    // Arc-length reparametrization: du/dt = v / (a |c'(u)|). Integrated with
    // classic RK4, four substeps per sample; the parameter error stays below
    // 1e-12 rad over the benchmark run.
    let du_dt = |u: f64| v / (a * gerono::speed(u));
    let mut u = 0.0_f64;
    let mut samples = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let dt = times[k] - times[k - 1];
            let substeps = 4;
            let h = dt / substeps as f64;
            for _ in 0..substeps {
                let k1 = du_dt(u);
                let k2 = du_dt(u + 0.5 * h * k1);
                let k3 = du_dt(u + 0.5 * h * k2);
                let k4 = du_dt(u + h * k3);
                u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        samples.push(figure_eight_sample(t, u, a, v));
    }
    samples
}

fn figure_eight_sample(t: f64, u: f64, a: f64, v: f64) -> KinematicSample {
    let (px, py) = gerono::point(u);
    let (d1x, d1y) = gerono::d1(u);
    let (d2x, d2y) = gerono::d2(u);
    let g = gerono::speed(u);
    let g2 = g * g;

    let position = Vec3::new(a * px, a * py, 0.0);
    // velocity = c'(u) * v / |c'(u)| has norm v by construction.
    let velocity = Vec3::new(d1x, d1y, 0.0) * (v / g);
    // Constant-speed acceleration: (v^2/a) [c''/g^2 - c' (c'.c'')/g^4].
    let dot = d1x * d2x + d1y * d2y;
    let scale = v * v / a;
    let acceleration = Vec3::new(
        scale * (d2x / g2 - d1x * dot / (g2 * g2)),
        scale * (d2y / g2 - d1y * dot / (g2 * g2)),
        0.0,
    );
    // Signed curvature (c' x c'')_z / (a g^3); zero at the crossings.
    let cross = d1x * d2y - d1y * d2x;
    let curvature = cross / (a * g * g2);

    planar_sample(t, position, velocity, acceleration, curvature, v)
}

/// Chained polyline length of the sampled positions.
pub fn arc_length(samples: &[KinematicSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            context: "arc length",
            required: 2,
            actual: samples.len(),
        });
    }
    check_monotone(samples)?;
    Ok(samples
        .windows(2)
        .map(|w| (w[1].position_world - w[0].position_world).norm())
        .sum())
}

/// Signed curvature recomputed from the stored velocity and acceleration:
/// `kappa = |v x a| / |v|^3`, signed by the z component of `v x a`.
pub fn curvature_profile(samples: &[KinematicSample]) -> Result<Vec<(f64, f64)>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let speed = s.velocity_world.norm();
            if speed == 0.0 {
                return Err(Error::ZeroSpeed { index });
            }
            let cross = s.velocity_world.cross(&s.acceleration_world);
            let kappa = cross.norm() / speed.powi(3) * cross.z.signum();
            // signum(0) is +1 for +0.0; keep straight segments at exactly 0.
            let kappa = if cross.norm() == 0.0 { 0.0 } else { kappa };
            Ok((s.timestamp, kappa))
        })
        .collect()
}

pub(crate) fn check_monotone(samples: &[KinematicSample]) -> Result<()> {
    for (i, w) in samples.windows(2).enumerate() {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::NonMonotoneTimestamps {
                index: i + 1,
                timestamp: w[1].timestamp,
            });
        }
    }
    Ok(())
}
