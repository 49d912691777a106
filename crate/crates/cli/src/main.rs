//! Command-line front end for the scale-observability toolkit.
//!
//! Subcommands cover the full pipeline: reference trajectory generation,
//! IMU synthesis, excitation and observability analysis, scale estimation,
//! Allan-deviation noise characterization, and the Monte Carlo experiment
//! driver. Usage errors exit with status 2, runtime failures with status 1.

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use scaleobs_core::allan::{
    allan_deviation, default_tau_grid, fit_noise_params, generate_static_log, NoiseFit,
};
use scaleobs_core::excitation::{excitation_index, excitation_windowed, fisher_total};
use scaleobs_core::imusim::{initial_state, synthesize};
use scaleobs_core::io;
use scaleobs_core::observability::{build_gramian, landmark_ring, rank_report, ObservabilityConfig};
use scaleobs_core::scalest::experiment::{run_experiment, ExperimentConfig};
use scaleobs_core::scalest::estimate_scale_ml;
use scaleobs_core::trajgen::{generate, TrajectoryKind, TrajectorySpec};
use scaleobs_core::{GravityModel, NoiseModel, Vec3};

#[derive(Parser)]
#[command(
    name = "scaleobs",
    version,
    about = "Metric-scale observability toolkit for visual-inertial data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a constant-speed reference trajectory as CSV.
    Generate(GenerateArgs),
    /// Synthesize IMU measurements for a trajectory CSV.
    Simulate(SimulateArgs),
    /// Summarize excitation statistics of an IMU log.
    Excite(ExciteArgs),
    /// Rank and nullspace of the navigation observability Gramian.
    Observe(ObserveArgs),
    /// Maximum-likelihood metric scale from a trajectory and an IMU log.
    Estimate(EstimateArgs),
    /// Allan-deviation tools for sensor noise characterization.
    #[command(subcommand)]
    Allan(AllanCommand),
    /// Run the Monte Carlo scale-estimation experiment and write artifacts.
    Experiment(ExperimentArgs),
}

/// Exit status policy: `Usage` maps to 2 (bad arguments or config),
/// `Runtime` maps to 1 (valid request that failed on real data).
enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<scaleobs_core::Error> for CliError {
    fn from(err: scaleobs_core::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn usage(err: impl Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Excite(args) => run_excite(args),
        Command::Observe(args) => run_observe(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Allan(command) => match command {
            AllanCommand::Synth(args) => run_allan_synth(args),
            AllanCommand::Fit(args) => run_allan_fit(args),
        },
        Command::Experiment(args) => run_experiment_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Writes `text` to `out`, or to stdout when no path was given. A closed
/// stdout (for example the reader side of a pipe exiting early) is treated
/// as success so the tool composes quietly with `head` and friends.
fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_text(path, text)?,
        None => {
            use std::io::Write;
            if let Err(err) = std::io::stdout().lock().write_all(text.as_bytes()) {
                if err.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(CliError::Runtime(format!("stdout: {err}")));
                }
            }
        }
    }
    Ok(())
}

/// Nominal rate recovered from a uniformly sampled time column.
fn infer_rate(timestamps: impl ExactSizeIterator<Item = f64>) -> Result<f64, CliError> {
    let n = timestamps.len();
    let mut iter = timestamps;
    let first = iter.next();
    let last = iter.last().or(first);
    match (first, last) {
        (Some(first), Some(last)) if n >= 2 && last > first => {
            Ok((n - 1) as f64 / (last - first))
        }
        _ => Err(CliError::Runtime(format!(
            "cannot infer a sample rate from {n} samples; need at least two with increasing timestamps"
        ))),
    }
}

fn gravity_arg(gravity_z: Option<f64>) -> GravityModel {
    match gravity_z {
        Some(z) => GravityModel::with_override(Vec3::new(0.0, 0.0, z)),
        None => GravityModel::default(),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Straight,
    Circle,
    Figure8,
}

impl From<KindArg> for TrajectoryKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Straight => TrajectoryKind::Straight,
            KindArg::Circle => TrajectoryKind::Circle,
            KindArg::Figure8 => TrajectoryKind::FigureEight,
        }
    }
}

/// Sensor noise densities and random walks, shared by the commands that
/// synthesize or weight IMU data. Defaults match a consumer-grade phone IMU.
#[derive(Args)]
struct NoiseArgs {
    /// Accelerometer white-noise density, (m/s^2)/sqrt(Hz).
    #[arg(long, default_value_t = 3.31e-3)]
    accel_density: f64,
    /// Gyroscope white-noise density, (rad/s)/sqrt(Hz).
    #[arg(long, default_value_t = 2.22e-2)]
    gyro_density: f64,
    /// Accelerometer bias random walk, (m/s^3)/sqrt(Hz).
    #[arg(long, default_value_t = 7.23e-5)]
    accel_walk: f64,
    /// Gyroscope bias random walk, (rad/s^2)/sqrt(Hz).
    #[arg(long, default_value_t = 8.83e-5)]
    gyro_walk: f64,
}

impl NoiseArgs {
    fn model(&self, sample_rate: f64) -> Result<NoiseModel, CliError> {
        let model = NoiseModel {
            accel_noise_density: self.accel_density,
            gyro_noise_density: self.gyro_density,
            accel_random_walk: self.accel_walk,
            gyro_random_walk: self.gyro_walk,
            sample_rate,
        };
        model.validate().map_err(usage)?;
        Ok(model)
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Trajectory family.
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Constant speed along the path, m/s.
    #[arg(long, default_value_t = 0.1)]
    speed: f64,
    /// Total arc length, m. Must equal speed times duration.
    #[arg(long = "length", default_value_t = 3.0)]
    path_length: f64,
    /// Run duration, s.
    #[arg(long, default_value_t = 30.0)]
    duration: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 33.0)]
    rate: f64,
    /// Circle radius or figure-eight lobe radius, m (defaults per kind).
    #[arg(long)]
    shape_param: Option<f64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut spec = TrajectorySpec::new(
        args.kind.into(),
        args.speed,
        args.path_length,
        args.duration,
        args.rate,
    )
    .map_err(usage)?;
    if args.shape_param.is_some() {
        spec.shape_param = args.shape_param;
        spec.validate().map_err(usage)?;
    }
    let samples = generate(&spec)?;
    emit(&args.out, &io::trajectory_to_csv(&samples))
}

#[derive(Args)]
struct SimulateArgs {
    /// Input trajectory CSV.
    #[arg(long)]
    trajectory: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Gravity z component override, m/s^2 (world z points up).
    #[arg(long)]
    gravity_z: Option<f64>,
    /// Seed for measurement noise and bias walks.
    #[arg(long, env = "SCALEOBS_SEED", default_value_t = 0)]
    seed: u64,
    /// Output IMU CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let kinematics = io::read_trajectory_csv(&args.trajectory)?;
    let rate = infer_rate(kinematics.iter().map(|s| s.timestamp))?;
    let noise = args.noise.model(rate)?;
    let gravity = gravity_arg(args.gravity_z);
    let (samples, _) = synthesize(
        &kinematics,
        &noise,
        &gravity,
        Vec3::zeros(),
        Vec3::zeros(),
        args.seed,
    )?;
    emit(&args.out, &io::imu_to_csv(&samples))
}

#[derive(Args)]
struct ExciteArgs {
    /// Input IMU CSV.
    #[arg(long)]
    input: PathBuf,
    /// Matching trajectory CSV; adds the scale-information total and its
    /// estimation bound to the report.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Accelerometer white-noise density weighting the information total.
    #[arg(long, default_value_t = 3.31e-3)]
    accel_density: f64,
    /// Emit a trailing-window excitation series as CSV instead of the
    /// summary JSON; the value is the window length in seconds.
    #[arg(long, num_args = 0..=1, default_missing_value = "5")]
    window: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_excite(args: ExciteArgs) -> Result<(), CliError> {
    let samples = io::read_imu_csv(&args.input)?;
    if let Some(window_seconds) = args.window {
        let series = excitation_windowed(&samples, window_seconds)?;
        let mut text = String::from("t,excitation_index\n");
        for (t, value) in series {
            text.push_str(&format!("{t},{value}\n"));
        }
        return emit(&args.out, &text);
    }
    let report = excitation_index(&samples)?;
    let (fisher_value, crlb_value) = match &args.trajectory {
        Some(path) => {
            let kinematics = io::read_trajectory_csv(path)?;
            let rate = infer_rate(kinematics.iter().map(|s| s.timestamp))?;
            let sigma_a = args.accel_density * (rate / 2.0).sqrt();
            let info = fisher_total(&kinematics, sigma_a)?;
            let crlb = match info.crlb_std {
                Some(value) => json!(value),
                None => json!("unobservable"),
            };
            (json!(info.total), crlb)
        }
        None => (serde_json::Value::Null, serde_json::Value::Null),
    };
    let report = json!({
        "sigma_yaw_rate": report.sigma_yaw_rate,
        "sigma_lateral_accel": report.sigma_lateral_accel,
        "excitation_index": report.excitation_index,
        "classification": report.classification.to_string(),
        "fisher_total": fisher_value,
        "crlb_std": crlb_value,
    });
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|err| CliError::Runtime(err.to_string()))?;
    text.push('\n');
    emit(&args.out, &text)
}

#[derive(Args)]
struct ObserveArgs {
    /// Input trajectory CSV.
    #[arg(long)]
    trajectory: PathBuf,
    /// Number of landmarks on the reference ring.
    #[arg(long, default_value_t = 6)]
    landmarks: usize,
    /// Landmark ring radius, m.
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    /// Leading trajectory samples integrated into the Gramian.
    #[arg(long, default_value_t = 331)]
    window_samples: usize,
    /// Finite-difference perturbation for the sensitivity columns.
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
    /// Relative singular-value cutoff separating rank from nullspace.
    #[arg(long, default_value_t = 1e-8)]
    rank_tolerance: f64,
    /// Gravity z component override, m/s^2.
    #[arg(long)]
    gravity_z: Option<f64>,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_observe(args: ObserveArgs) -> Result<(), CliError> {
    let kinematics = io::read_trajectory_csv(&args.trajectory)?;
    let Some(first) = kinematics.first() else {
        return Err(CliError::Runtime(format!(
            "{}: trajectory is empty",
            args.trajectory.display()
        )));
    };
    let config = ObservabilityConfig {
        landmark_positions: landmark_ring(args.landmarks, args.radius),
        window_samples: args.window_samples,
        fd_step: args.fd_step,
        rank_tolerance: args.rank_tolerance,
        gravity: gravity_arg(args.gravity_z),
    };
    config.validate().map_err(usage)?;
    let gramian = build_gramian(&kinematics, &config)?;
    let report = rank_report(&gramian, &config, &initial_state(first))?;
    emit(&args.out, &io::to_json_pretty(&report)?)
}

#[derive(Args)]
struct EstimateArgs {
    /// Up-to-scale trajectory CSV (for example from monocular odometry).
    #[arg(long)]
    trajectory: PathBuf,
    /// IMU CSV sampled on the same time grid.
    #[arg(long)]
    imu: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Gravity z component override, m/s^2.
    #[arg(long)]
    gravity_z: Option<f64>,
    /// Jointly estimate a constant accelerometer bias.
    #[arg(long)]
    estimate_bias: bool,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_estimate(args: EstimateArgs) -> Result<(), CliError> {
    let kinematics = io::read_trajectory_csv(&args.trajectory)?;
    let samples = io::read_imu_csv(&args.imu)?;
    let rate = infer_rate(samples.iter().map(|s| s.timestamp))?;
    let noise = args.noise.model(rate)?;
    let gravity = gravity_arg(args.gravity_z);
    let estimate = estimate_scale_ml(&kinematics, &samples, &noise, &gravity, args.estimate_bias)?;
    emit(&args.out, &io::to_json_pretty(&estimate)?)
}

#[derive(Subcommand)]
enum AllanCommand {
    /// Synthesize a static (motionless, gravity-aligned) IMU log.
    Synth(AllanSynthArgs),
    /// Compute per-axis Allan curves and fit noise parameters from a log.
    Fit(AllanFitArgs),
}

#[derive(Args)]
struct AllanSynthArgs {
    /// Log duration, s.
    #[arg(long, default_value_t = 7200.0)]
    duration: f64,
    /// Sample rate, Hz.
    #[arg(long, default_value_t = 33.0)]
    rate: f64,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Seed for measurement noise and bias walks.
    #[arg(long, env = "SCALEOBS_SEED", default_value_t = 0)]
    seed: u64,
    /// Output IMU CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_allan_synth(args: AllanSynthArgs) -> Result<(), CliError> {
    let noise = args.noise.model(args.rate)?;
    let samples = generate_static_log(&noise, args.duration, args.seed)?;
    emit(&args.out, &io::imu_to_csv(&samples))
}

#[derive(Args)]
struct AllanFitArgs {
    /// Input static IMU CSV.
    #[arg(long)]
    input: PathBuf,
    /// Directory receiving six per-axis curve CSVs and the fit JSON.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn run_allan_fit(args: AllanFitArgs) -> Result<(), CliError> {
    let samples = io::read_imu_csv(&args.input)?;
    let rate = infer_rate(samples.iter().map(|s| s.timestamp))?;
    let series: [(&str, Vec<f64>); 6] = [
        ("accel_x", samples.iter().map(|s| s.specific_force_body.x).collect()),
        ("accel_y", samples.iter().map(|s| s.specific_force_body.y).collect()),
        ("accel_z", samples.iter().map(|s| s.specific_force_body.z).collect()),
        ("gyro_x", samples.iter().map(|s| s.angular_velocity_body.x).collect()),
        ("gyro_y", samples.iter().map(|s| s.angular_velocity_body.y).collect()),
        ("gyro_z", samples.iter().map(|s| s.angular_velocity_body.z).collect()),
    ];
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|err| CliError::Runtime(format!("{}: {err}", args.out_dir.display())))?;
    let mut fits = Vec::with_capacity(series.len());
    for (axis, values) in &series {
        let taus = default_tau_grid(values.len(), rate);
        let mut curve = allan_deviation(values, rate, &taus)?;
        curve.axis = (*axis).to_string();
        let path = args.out_dir.join(format!("allan_{axis}.csv"));
        io::write_text(&path, &io::allan_curve_to_csv(&curve))?;
        println!("{}", path.display());
        fits.push(fit_noise_params(&curve)?);
    }
    let summary = json!({
        "accel": sensor_summary(&fits[..3]),
        "gyro": sensor_summary(&fits[3..]),
    });
    let path = args.out_dir.join("allan_fit.json");
    io::write_text(&path, &format!("{:#}\n", summary))?;
    println!("{}", path.display());
    Ok(())
}

/// Per-axis fits plus the mean of whichever parameters were identified.
fn sensor_summary(fits: &[NoiseFit]) -> serde_json::Value {
    let mean = |pick: fn(&NoiseFit) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = fits.iter().filter_map(pick).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    json!({
        "x": fits[0],
        "y": fits[1],
        "z": fits[2],
        "mean_noise_density": mean(|fit| fit.noise_density),
        "mean_random_walk": mean(|fit| fit.random_walk),
    })
}

/// Optional overrides for the experiment configuration. Precedence is
/// built-in defaults, then the config file, then command-line flags.
#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration JSON; missing fields keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the result tables and summary JSON.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the Monte Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long, env = "SCALEOBS_SEED")]
    seed: Option<u64>,
    /// Override the true metric scale applied to the synthetic runs.
    #[arg(long)]
    s_true: Option<f64>,
}

/// On-disk experiment configuration. Every field is optional; unknown
/// fields are rejected so typos fail loudly.
#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentFile {
    kinds: Option<Vec<TrajectoryKind>>,
    speed: Option<f64>,
    path_length: Option<f64>,
    duration: Option<f64>,
    sample_rate: Option<f64>,
    shape_param: Option<f64>,
    noise: Option<NoiseModel>,
    gravity: Option<[f64; 3]>,
    s_true: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
}

fn run_experiment_cmd(args: ExperimentArgs) -> Result<(), CliError> {
    let mut config = ExperimentConfig::default();
    let mut out_dir = PathBuf::from(".");
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|err| CliError::Runtime(format!("{}: {err}", path.display())))?;
        let file: ExperimentFile = serde_json::from_str(&text)
            .map_err(|err| usage(format!("{}: {err}", path.display())))?;
        if let Some(kinds) = file.kinds {
            config.kinds = kinds;
        }
        if let Some(speed) = file.speed {
            config.speed = speed;
        }
        if let Some(path_length) = file.path_length {
            config.path_length = path_length;
        }
        if let Some(duration) = file.duration {
            config.duration = duration;
        }
        if let Some(sample_rate) = file.sample_rate {
            config.sample_rate = sample_rate;
            config.noise.sample_rate = sample_rate;
        }
        if file.shape_param.is_some() {
            config.shape_param = file.shape_param;
        }
        if let Some(noise) = file.noise {
            config.noise = noise;
        }
        if let Some([x, y, z]) = file.gravity {
            config.gravity = GravityModel::with_override(Vec3::new(x, y, z));
        }
        if let Some(s_true) = file.s_true {
            config.s_true = s_true;
        }
        if let Some(trials) = file.trials {
            config.trials = trials;
        }
        if let Some(seed) = file.seed {
            config.seed = seed;
        }
        if let Some(dir) = file.output_dir {
            out_dir = dir;
        }
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(s_true) = args.s_true {
        config.s_true = s_true;
    }
    if let Some(dir) = args.out_dir {
        out_dir = dir;
    }
    config.validate().map_err(usage)?;
    let report = run_experiment(&config)?;
    let paths = io::write_experiment_artifacts(&report, &out_dir)?;
    for path in paths {
        println!("{}", path.display());
    }
    Ok(())
}
