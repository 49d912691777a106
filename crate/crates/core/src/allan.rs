//! Allan deviation analysis of static IMU logs.
//!
//! An Allan deviation curve separates an inertial sensor's error sources by
//! their signature versus averaging time: white measurement noise falls off
//! as `tau^(-1/2)` while bias random walk grows as `tau^(+1/2)`. Fitting
//! fixed-slope lines to those regions recovers the noise density and
//! random-walk coefficient of a [`NoiseModel`], closing the loop with
//! [`synthesize`](crate::imusim::synthesize).

use serde::{Deserialize, Serialize};

use crate::imusim::{synthesize, ImuSample};
use crate::math::{Rot3, Vec3};
use crate::trajgen::KinematicSample;
use crate::types::{GravityModel, NoiseModel};
use crate::{Error, Result};

/// Points per decade of the default tau grid.
pub const TAU_POINTS_PER_DECADE: usize = 20;
/// Log-log regression window length, in curve points (half a decade).
pub const FIT_WINDOW: usize = 10;
/// A window is assigned to a slope target when it matches this closely.
pub const SLOPE_TOL: f64 = 0.1;
/// Minimum count of walk-dominated points needed to report a random walk.
pub const WALK_MIN_POINTS: usize = 3;
/// Acceptance band around the ideal `+1` log-log growth of the
/// white-subtracted excess variance. Deliberately loose: deviation
/// estimates at the largest taus average few independent clusters and
/// their correlated scatter tilts the whole tail, so even a true walk can
/// show apparent growth anywhere from slightly negative to well past 2.
/// The gate only rejects clearly decaying excess, the signature of leaked
/// white noise rather than a cumulative error process.
pub const WALK_SLOPE_TOL: f64 = 1.5;

/// Allan deviation of one signal channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanCurve {
    /// Averaging times, s, strictly increasing.
    pub taus: Vec<f64>,
    /// Allan deviation at each tau, signal units, nonnegative.
    pub deviations: Vec<f64>,
    /// Which channel the curve describes, e.g. `"ax"` or `"wz"`.
    pub axis: String,
}

impl AllanCurve {
    /// Builds a curve, rejecting non-increasing taus, negative deviations
    /// and length mismatches.
    pub fn new(taus: Vec<f64>, deviations: Vec<f64>, axis: impl Into<String>) -> Result<Self> {
        if taus.len() != deviations.len() {
            return Err(Error::invalid(
                "allan curve",
                format!(
                    "{} taus but {} deviations",
                    taus.len(),
                    deviations.len()
                ),
            ));
        }
        if taus.windows(2).any(|w| w[1].is_nan() || w[0].is_nan() || w[1] <= w[0]) {
            return Err(Error::invalid(
                "allan curve",
                "taus must be strictly increasing".to_string(),
            ));
        }
        if deviations.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::invalid(
                "allan curve",
                "deviations must be nonnegative".to_string(),
            ));
        }
        Ok(AllanCurve {
            taus,
            deviations,
            axis: axis.into(),
        })
    }
}

/// Noise parameters extracted from an [`AllanCurve`].
///
/// A `None` coefficient means the curve has no region with the matching
/// slope, which is expected when that noise component is absent; the fit
/// fails outright only when neither region exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    /// White-noise density, units/sqrt(Hz), from the -1/2-slope line at 1 s.
    pub noise_density: Option<f64>,
    /// Random-walk coefficient, units*sqrt(Hz), from the +1/2-slope line at 3 s.
    pub random_walk: Option<f64>,
    /// RMS residual of log10(deviation) over the fitted regions.
    pub fit_quality: f64,
    /// Tau span where the curve is locally flat (bias-instability floor),
    /// detected for reporting only.
    pub flat_region: Option<(f64, f64)>,
}

/// Overlapping Allan deviation of `samples` at the requested averaging times.
///
/// For cluster length `m = round(tau * rate)` the estimator is
/// `sigma^2(tau) = 1/(2(N-2m)) * sum_k (ybar_{k+m} - ybar_k)^2` over all
/// `N - 2m` overlapping pairs of length-`m` cluster means. Taus that round
/// to the same cluster length are merged and reported as `m / rate`.
pub fn allan_deviation(samples: &[f64], rate: f64, taus: &[f64]) -> Result<AllanCurve> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(
            "allan deviation",
            format!("sample rate must be positive, got {rate}"),
        ));
    }
    if taus.is_empty() {
        return Err(Error::invalid(
            "allan deviation",
            "no averaging times requested".to_string(),
        ));
    }
    let n = samples.len();
    if n < 3 {
        return Err(Error::TooFewSamples {
            context: "allan deviation",
            required: 3,
            actual: n,
        });
    }

    let max_m = (n - 1) / 2;
    let mut cluster_lengths = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(
                "allan deviation",
                format!("averaging time must be positive, got {tau}"),
            ));
        }
        let m = (tau * rate).round() as usize;
        if m < 1 {
            return Err(Error::invalid(
                "allan deviation",
                format!("tau = {tau} s is below the sample period {}", 1.0 / rate),
            ));
        }
        if m > max_m {
            return Err(Error::TauTooLong {
                requested_tau: tau,
                max_feasible_tau: max_m as f64 / rate,
            });
        }
        cluster_lengths.push(m);
    }
    cluster_lengths.sort_unstable();
    cluster_lengths.dedup();

    // Mean subtraction keeps the cumulative sums small; the deviation itself
    // is invariant to any constant offset.
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut cumsum = Vec::with_capacity(n + 1);
    cumsum.push(0.0);
    let mut acc = 0.0;
    for &x in samples {
        acc += x - mean;
        cumsum.push(acc);
    }

    let mut out_taus = Vec::with_capacity(cluster_lengths.len());
    let mut deviations = Vec::with_capacity(cluster_lengths.len());
    for &m in &cluster_lengths {
        let pairs = n - 2 * m;
        let mut sum_sq = 0.0;
        for k in 0..pairs {
            let d = cumsum[k + 2 * m] - 2.0 * cumsum[k + m] + cumsum[k];
            sum_sq += d * d;
        }
        let avar = sum_sq / (2.0 * (m * m) as f64 * pairs as f64);
        out_taus.push(m as f64 / rate);
        deviations.push(avar.sqrt());
    }
    AllanCurve::new(out_taus, deviations, "signal")
}

/// Log-spaced tau grid with [`TAU_POINTS_PER_DECADE`] points per decade,
/// from `2/rate` up to `n_samples/(5*rate)`.
pub fn default_tau_grid(n_samples: usize, rate: f64) -> Vec<f64> {
    let tau_min = 2.0 / rate;
    let tau_max = n_samples as f64 / (5.0 * rate);
    if tau_max.is_nan() || tau_min.is_nan() || tau_max < tau_min {
        return Vec::new();
    }
    let decades = (tau_max / tau_min).log10();
    let steps = (decades * TAU_POINTS_PER_DECADE as f64).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| tau_min * 10f64.powf(i as f64 / TAU_POINTS_PER_DECADE as f64))
        .collect();
    if *grid.last().unwrap() < tau_max * (1.0 - 1e-12) {
        grid.push(tau_max);
    }
    grid
}

/// OLS slope of `log10(deviation)` against `log10(tau)` over curve points
/// `[start, start+len)`. Points with zero deviation are excluded upstream.
fn window_slope(log_tau: &[f64], log_dev: &[f64], start: usize, len: usize) -> f64 {
    let xs = &log_tau[start..start + len];
    let ys = &log_dev[start..start + len];
    let n = len as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Marks every curve point covered by a regression window whose slope is
/// within [`SLOPE_TOL`] of `target`.
fn slope_region(log_tau: &[f64], log_dev: &[f64], target: f64) -> Vec<usize> {
    let n = log_tau.len();
    let mut marked = vec![false; n];
    if n >= FIT_WINDOW {
        for start in 0..=n - FIT_WINDOW {
            if (window_slope(log_tau, log_dev, start, FIT_WINDOW) - target).abs() < SLOPE_TOL {
                for flag in &mut marked[start..start + FIT_WINDOW] {
                    *flag = true;
                }
            }
        }
    }
    (0..n).filter(|&i| marked[i]).collect()
}

/// Extracts noise density and random-walk coefficient from a deviation curve.
///
/// A sliding log-log regression locates the `-1/2` (white noise) slope
/// region and a fixed-slope line fitted there gives the density: with the
/// per-sample convention `sigma = density * sqrt(rate/2)`, white noise
/// follows `sigma^2(tau) = density^2 / (2 tau)`, so the density is
/// `sqrt(2)` times the white line read at `tau = 1 s`.
///
/// The random walk follows `sigma^2(tau) = rw^2 * tau / 3`, but its `+1/2`
/// slope often never dominates within the measurable tau span when the
/// crossover sits late in the record. Once a white fit exists, the walk is
/// therefore read from the excess variance `sigma^2(tau) - white^2(tau)`
/// over the taus where that excess exceeds the white level: if at least
/// [`WALK_MIN_POINTS`] such points grow in proportion to tau (within
/// [`WALK_SLOPE_TOL`] in log-log variance slope), the fixed-growth line
/// through them yields `rw`. Without a white fit the `+1/2` region is
/// located directly, which covers walk-dominated curves.
pub fn fit_noise_params(curve: &AllanCurve) -> Result<NoiseFit> {
    let span_ok = match (curve.taus.first(), curve.taus.last()) {
        (Some(first), Some(last)) => last / first >= 100.0 * (1.0 - 1e-9),
        _ => false,
    };
    if !span_ok {
        return Err(Error::invalid(
            "noise fit",
            "deviation curve must span at least two decades of tau".to_string(),
        ));
    }

    // Zero deviations (ideal sensors) have no log representation and carry
    // no slope information; drop them before regression.
    let points: Vec<(f64, f64)> = curve
        .taus
        .iter()
        .zip(&curve.deviations)
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| (t.log10(), d.log10()))
        .collect();
    let log_tau: Vec<f64> = points.iter().map(|p| p.0).collect();
    let log_dev: Vec<f64> = points.iter().map(|p| p.1).collect();

    let mut residual_sq = 0.0;
    let mut residual_count = 0usize;

    // White noise: fixed -1/2-slope line through the detected region, so
    // log10 sigma = intercept - 0.5 * log10 tau.
    let white = slope_region(&log_tau, &log_dev, -0.5);
    let white_intercept = (!white.is_empty()).then(|| {
        let intercept = white
            .iter()
            .map(|&i| log_dev[i] + 0.5 * log_tau[i])
            .sum::<f64>()
            / white.len() as f64;
        for &i in &white {
            let r = log_dev[i] - (intercept - 0.5 * log_tau[i]);
            residual_sq += r * r;
        }
        residual_count += white.len();
        intercept
    });
    let noise_density = white_intercept.map(|c| 2f64.sqrt() * 10f64.powf(c));

    let mut random_walk = None;
    if let Some(c_white) = white_intercept {
        // Walk from the white-subtracted excess variance over the points
        // where that excess exceeds the fitted white variance. `rw^2` comes
        // from a weighted linear regression of the excess against `tau/3`
        // through the origin, carried out in the variance domain where the
        // deviation estimates are unbiased. The inverse-variance weights are
        // `1 / (sigma^4(tau) * tau)` up to a constant, since a deviation
        // estimate at larger tau averages proportionally fewer independent
        // clusters. A first pass weights by the measured totals; because
        // those share the fluctuations being weighted (biasing the fit
        // low), a second pass reweights by the smooth model totals the
        // first pass implies.
        let candidates: Vec<(f64, f64, f64)> = log_tau
            .iter()
            .zip(&log_dev)
            .filter_map(|(&lt, &ld)| {
                let tau = 10f64.powf(lt);
                let total = 10f64.powf(2.0 * ld);
                let white_var = 10f64.powf(2.0 * c_white - lt);
                let excess = total - white_var;
                (excess > white_var).then_some((tau, excess, total))
            })
            .collect();
        if candidates.len() >= WALK_MIN_POINTS {
            // Loose log-log growth gate; see WALK_SLOPE_TOL.
            let n = candidates.len() as f64;
            let mean_lt = candidates.iter().map(|(t, _, _)| t.log10()).sum::<f64>() / n;
            let mean_le = candidates.iter().map(|(_, e, _)| e.log10()).sum::<f64>() / n;
            let sxy: f64 = candidates
                .iter()
                .map(|(t, e, _)| (t.log10() - mean_lt) * (e.log10() - mean_le))
                .sum();
            let sxx: f64 = candidates
                .iter()
                .map(|(t, _, _)| {
                    let d = t.log10() - mean_lt;
                    d * d
                })
                .sum();
            if sxx > 0.0 && (sxy / sxx - 1.0).abs() < WALK_SLOPE_TOL {
                let solve = |weight: &dyn Fn(f64, f64) -> f64| -> f64 {
                    let num: f64 = candidates
                        .iter()
                        .map(|&(t, e, tot)| weight(t, tot) * (t / 3.0) * e)
                        .sum();
                    let den: f64 = candidates
                        .iter()
                        .map(|&(t, _, tot)| weight(t, tot) * (t / 3.0) * (t / 3.0))
                        .sum();
                    num / den
                };
                let first = solve(&|t, tot| 1.0 / (tot * tot * t)).max(0.0);
                let walk_sq = solve(&|t, _| {
                    let model = 10f64.powf(2.0 * c_white) / t + first * t / 3.0;
                    1.0 / (model * model * t)
                });
                random_walk = Some(walk_sq.sqrt());
                for (t, e, _) in &candidates {
                    // Half the variance-domain log residual, to stay
                    // comparable with the amplitude-domain white residuals.
                    let r = 0.5 * (e.log10() - (walk_sq * t / 3.0).log10());
                    residual_sq += r * r;
                }
                residual_count += candidates.len();
            }
        }
    } else {
        let walk = slope_region(&log_tau, &log_dev, 0.5);
        if !walk.is_empty() {
            let intercept = walk
                .iter()
                .map(|&i| log_dev[i] - 0.5 * log_tau[i])
                .sum::<f64>()
                / walk.len() as f64;
            for &i in &walk {
                let r = log_dev[i] - (intercept + 0.5 * log_tau[i]);
                residual_sq += r * r;
            }
            residual_count += walk.len();
            random_walk = Some(10f64.powf(intercept) * 3f64.sqrt());
        }
    }

    if noise_density.is_none() && random_walk.is_none() {
        return Err(Error::MissingSlopeRegion {
            targets: "neither the -1/2 (white noise) nor the +1/2 (random walk) slope region \
                      is present"
                .to_string(),
        });
    }
    let fit_quality = if residual_count == 0 {
        0.0
    } else {
        (residual_sq / residual_count as f64).sqrt()
    };

    let flat = slope_region(&log_tau, &log_dev, 0.0);
    let flat_region = if flat.is_empty() {
        None
    } else {
        Some((
            10f64.powf(log_tau[*flat.first().unwrap()]),
            10f64.powf(log_tau[*flat.last().unwrap()]),
        ))
    };

    Ok(NoiseFit {
        noise_density,
        random_walk,
        fit_quality,
        flat_region,
    })
}

/// Synthesizes a static (zero-motion) IMU log for noise characterization.
///
/// The accelerometer reads gravity reaction plus noise, the gyro pure noise,
/// both with white and random-walk components per `noise`. Deterministic in
/// `seed`.
pub fn generate_static_log(
    noise: &NoiseModel,
    duration: f64,
    seed: u64,
) -> Result<Vec<ImuSample>> {
    noise.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(
            "static log",
            format!("duration must be positive, got {duration}"),
        ));
    }
    let steps = (duration * noise.sample_rate).round();
    if steps < 1e4 {
        return Err(Error::TooFewSamples {
            context: "static log",
            required: 10_000,
            actual: steps as usize,
        });
    }
    let rest: Vec<KinematicSample> = (0..=steps as usize)
        .map(|k| KinematicSample {
            timestamp: k as f64 / noise.sample_rate,
            position_world: Vec3::zeros(),
            velocity_world: Vec3::zeros(),
            acceleration_world: Vec3::zeros(),
            rotation: Rot3::identity(),
            yaw_rate: 0.0,
            curvature: 0.0,
        })
        .collect();
    let (samples, _) = synthesize(
        &rest,
        noise,
        &GravityModel::default(),
        Vec3::zeros(),
        Vec3::zeros(),
        seed,
    )?;
    Ok(samples)
}
