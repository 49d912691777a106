//! CSV and JSON interchange formats shared by the CLI and the test suites.
//!
//! Every emission here round-trips through its own parser losslessly: floats
//! are written with Rust's shortest-round-trip formatting, which reproduces
//! the exact bit pattern on parse, and parse errors carry the source name
//! and one-based line number of the offending record.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::allan::AllanCurve;
use crate::imusim::ImuSample;
use crate::math::{Rot3, Vec3};
use crate::scalest::experiment::ExperimentReport;
use crate::trajgen::KinematicSample;
use crate::{Error, Result};

/// Header of trajectory CSV files.
pub const TRAJECTORY_HEADER: &str = "t,px,py,pz,vx,vy,vz,ax,ay,az,yaw_rate,curvature";

/// Header of IMU CSV files.
pub const IMU_HEADER: &str = "t,wx,wy,wz,ax,ay,az";

/// Header of Allan deviation CSV files.
pub const ALLAN_HEADER: &str = "tau,sigma";

/// Renders kinematic samples as trajectory CSV.
pub fn trajectory_to_csv(samples: &[KinematicSample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in samples {
        let p = s.position_world;
        let v = s.velocity_world;
        let a = s.acceleration_world;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.timestamp, p.x, p.y, p.z, v.x, v.y, v.z, a.x, a.y, a.z, s.yaw_rate, s.curvature
        );
    }
    out
}

/// Parses trajectory CSV. The rotation column set is not part of the format;
/// the body-to-world rotation is rebuilt from the velocity direction (body x
/// along velocity, z up), matching how the trajectories are generated. A
/// sample at rest keeps the identity attitude.
pub fn trajectory_from_csv(text: &str, source: &str) -> Result<Vec<KinematicSample>> {
    let rows = parse_table(text, source, TRAJECTORY_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|row| {
            let velocity_world = Vec3::new(row[4], row[5], row[6]);
            KinematicSample {
                timestamp: row[0],
                position_world: Vec3::new(row[1], row[2], row[3]),
                velocity_world,
                acceleration_world: Vec3::new(row[7], row[8], row[9]),
                rotation: rotation_from_velocity(velocity_world),
                yaw_rate: row[10],
                curvature: row[11],
            }
        })
        .collect())
}

/// Renders IMU samples as CSV.
pub fn imu_to_csv(samples: &[ImuSample]) -> String {
    let mut out = String::with_capacity(48 * (samples.len() + 1));
    out.push_str(IMU_HEADER);
    out.push('\n');
    for s in samples {
        let w = s.angular_velocity_body;
        let f = s.specific_force_body;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.timestamp, w.x, w.y, w.z, f.x, f.y, f.z
        );
    }
    out
}

/// Parses IMU CSV.
pub fn imu_from_csv(text: &str, source: &str) -> Result<Vec<ImuSample>> {
    let rows = parse_table(text, source, IMU_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|row| ImuSample {
            timestamp: row[0],
            angular_velocity_body: Vec3::new(row[1], row[2], row[3]),
            specific_force_body: Vec3::new(row[4], row[5], row[6]),
        })
        .collect())
}

/// Renders one axis's Allan deviation curve as CSV.
pub fn allan_curve_to_csv(curve: &AllanCurve) -> String {
    let mut out = String::with_capacity(32 * (curve.taus.len() + 1));
    out.push_str(ALLAN_HEADER);
    out.push('\n');
    for (tau, sigma) in curve.taus.iter().zip(&curve.deviations) {
        let _ = writeln!(out, "{tau},{sigma}");
    }
    out
}

/// Parses an Allan deviation CSV back into a curve for the named axis.
pub fn allan_curve_from_csv(text: &str, source: &str, axis: &str) -> Result<AllanCurve> {
    let rows = parse_table(text, source, ALLAN_HEADER)?;
    let taus: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let sigmas: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    AllanCurve::new(taus, sigmas, axis)
}

/// Reads a trajectory CSV file.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<KinematicSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    trajectory_from_csv(&text, &path.display().to_string())
}

/// Writes a trajectory CSV file.
pub fn write_trajectory_csv(path: &Path, samples: &[KinematicSample]) -> Result<()> {
    fs::write(path, trajectory_to_csv(samples)).map_err(|e| Error::io(path, e))
}

/// Reads an IMU CSV file.
pub fn read_imu_csv(path: &Path) -> Result<Vec<ImuSample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    imu_from_csv(&text, &path.display().to_string())
}

/// Writes an IMU CSV file.
pub fn write_imu_csv(path: &Path, samples: &[ImuSample]) -> Result<()> {
    fs::write(path, imu_to_csv(samples)).map_err(|e| Error::io(path, e))
}

/// Writes any string artifact, mapping failures to the path.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Excitation table rows (one per trajectory), Table-II shaped.
pub fn excitation_table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("trajectory,sigma_wz,sigma_ay,E\n");
    for outcome in &report.outcomes {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            outcome.trajectory.name(),
            outcome.mean_sigma_yaw_rate,
            outcome.mean_sigma_lateral_accel,
            outcome.mean_excitation
        );
    }
    out
}

/// Scale table rows (one per trajectory), Table-III shaped. Trajectories
/// that never produced distance pairs get "unobservable" cells.
pub fn scale_table_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("trajectory,scale,error_percent,sigma_d_cm\n");
    for outcome in &report.outcomes {
        match &outcome.regression {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    outcome.trajectory.name(),
                    r.scale,
                    100.0 * (r.scale - 1.0),
                    100.0 * r.sigma_d
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},unobservable,unobservable,unobservable",
                    outcome.trajectory.name()
                );
            }
        }
    }
    out
}

/// Plot-ready excitation-versus-error rows, one per trajectory.
pub fn excitation_vs_error_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("trajectory,excitation_index,mean_abs_scale_error\n");
    for outcome in &report.outcomes {
        match outcome.mean_abs_error {
            Some(err) => {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    outcome.trajectory.name(),
                    outcome.mean_excitation,
                    err
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},unobservable",
                    outcome.trajectory.name(),
                    outcome.mean_excitation
                );
            }
        }
    }
    out
}

/// Pretty-printed JSON for any serializable report.
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invalid("json serialization", e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes the four experiment artifacts into `dir` (created if missing) and
/// returns their paths in a fixed order: excitation table, scale table,
/// excitation-versus-error plot data, summary JSON.
pub fn write_experiment_artifacts(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let artifacts = [
        ("excitation_table.csv", excitation_table_csv(report)),
        ("scale_table.csv", scale_table_csv(report)),
        ("excitation_vs_error.csv", excitation_vs_error_csv(report)),
        ("summary.json", to_json_pretty(report)?),
    ];
    let mut paths = Vec::with_capacity(artifacts.len());
    for (name, contents) in artifacts {
        let path = dir.join(name);
        write_text(&path, &contents)?;
        paths.push(path);
    }
    Ok(paths)
}

fn rotation_from_velocity(velocity: Vec3) -> Rot3 {
    if velocity.x == 0.0 && velocity.y == 0.0 {
        Rot3::identity()
    } else {
        Rot3::from_yaw(velocity.y.atan2(velocity.x))
    }
}

/// Splits CSV text into rows of floats, enforcing the header and column
/// count. Blank lines are ignored; any malformed field names its source and
/// one-based line number.
fn parse_table(text: &str, source: &str, expected_header: &str) -> Result<Vec<Vec<f64>>> {
    let columns = expected_header.split(',').count();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == expected_header => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                reason: format!(
                    "expected header \"{expected_header}\", found \"{}\"",
                    header.trim_end()
                ),
            })
        }
        None => {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                reason: format!("empty file; expected header \"{expected_header}\""),
            })
        }
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Parse {
                path: source.to_string(),
                line: index + 1,
                reason: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for (column, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: source.to_string(),
                line: index + 1,
                reason: format!("column {} (\"{}\") is not a number", column + 1, field),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}
