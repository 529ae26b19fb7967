use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::{dcm_to_quat, Dataset, EstimateSeries, SweepTable, TruthSeries};
use crate::error::{Error, Result};
use crate::ins::ImuSample;
use crate::sensors::{GnssVelObs, OdoObs};

const IMU_HEADER: [&str; 7] = ["t", "gx", "gy", "gz", "ax", "ay", "az"];
const GNSS_HEADER: [&str; 7] = ["t", "vx", "vy", "vz", "sx", "sy", "sz"];
const ODO_HEADER: [&str; 7] = ["t", "vf", "vl", "vd", "sx", "sy", "sz"];
const TRUTH_HEADER: [&str; 11] = ["t", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "rx", "ry", "rz"];
const TRACE_HEADER: [&str; 5] = ["p_att", "p_vel", "p_pos", "p_bg", "p_ba"];

/// File locations of one dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetPaths {
    pub imu: PathBuf,
    pub gnss: PathBuf,
    pub odo: PathBuf,
    pub truth: PathBuf,
}

impl DatasetPaths {
    /// Standard file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            imu: dir.join("imu.csv"),
            gnss: dir.join("gnss_vel.csv"),
            odo: dir.join("odo.csv"),
            truth: dir.join("truth.csv"),
        }
    }
}

// Rust's shortest round-trip formatting keeps written files bit-exact on replay.
fn fmt_row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| format!("{v}")).collect()
}

fn render<R>(header: &[&str], rows: R) -> Result<Vec<u8>>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv encoding failed: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv encoding failed: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the IMU, observation and (when present) truth files. Every file is
/// encoded in memory first, so an encoding failure leaves nothing on disk.
pub fn write_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<DatasetPaths> {
    let paths = DatasetPaths::in_dir(dir);
    let imu = render(
        &IMU_HEADER,
        ds.imu.iter().map(|s| fmt_row([s.time, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z])),
    )?;
    let gnss = render(
        &GNSS_HEADER,
        ds.gnss.iter().map(|o| fmt_row([o.time, o.vel.x, o.vel.y, o.vel.z, o.sigma.x, o.sigma.y, o.sigma.z])),
    )?;
    let odo = render(
        &ODO_HEADER,
        ds.odo.iter().map(|o| {
            fmt_row([o.time, o.vel_body.x, o.vel_body.y, o.vel_body.z, o.sigma.x, o.sigma.y, o.sigma.z])
        }),
    )?;
    let truth = ds
        .truth
        .as_ref()
        .map(|t| {
            render(
                &TRUTH_HEADER,
                t.states.iter().zip(&t.quats).map(|(s, q)| {
                    fmt_row([s.time, q[0], q[1], q[2], q[3], s.vel.x, s.vel.y, s.vel.z, s.pos.x, s.pos.y, s.pos.z])
                }),
            )
        })
        .transpose()?;
    write_file(&paths.imu, &imu)?;
    write_file(&paths.gnss, &gnss)?;
    write_file(&paths.odo, &odo)?;
    if let Some(truth) = truth {
        write_file(&paths.truth, &truth)?;
    }
    Ok(paths)
}

/// Parses a numeric CSV with an exact header, returning rows with their line
/// numbers. Time (first column) must not decrease; with `strict` it must
/// increase.
fn read_table(path: &Path, header: &[&str], strict: bool) -> Result<Vec<Vec<f64>>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: u64, msg: String| Error::Parse { path: path.to_path_buf(), line: line as usize, msg };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_slice());
    let found = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        let line = found.position().map_or(1, |p| p.line());
        return Err(parse_err(
            line,
            format!("expected header '{}', found '{}'", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(i, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("column '{}': '{field}' is not a finite number", header[i])))
            })
            .collect::<Result<Vec<f64>>>()?;
        let t = row[0];
        if t < last || (strict && t == last) {
            return Err(parse_err(line, format!("time {t} does not follow {last}")));
        }
        last = t;
        rows.push(row);
    }
    Ok(rows)
}

fn v3(row: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(row[at], row[at + 1], row[at + 2])
}

/// Reads a dataset. The IMU file is required; missing observation files mean
/// no observations of that kind and a missing truth file means no truth.
pub fn read_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let imu = read_table(&paths.imu, &IMU_HEADER, true)?
        .iter()
        .map(|r| ImuSample::new(r[0], v3(r, 1), v3(r, 4)))
        .collect();
    let optional = |p: &Path, header: &[&str], strict| -> Result<Vec<Vec<f64>>> {
        if p.exists() {
            read_table(p, header, strict)
        } else {
            Ok(Vec::new())
        }
    };
    let gnss = optional(&paths.gnss, &GNSS_HEADER, false)?
        .iter()
        .map(|r| GnssVelObs { time: r[0], vel: v3(r, 1), sigma: v3(r, 4) })
        .collect();
    let odo = optional(&paths.odo, &ODO_HEADER, false)?
        .iter()
        .map(|r| OdoObs { time: r[0], vel_body: v3(r, 1), sigma: v3(r, 4) })
        .collect();
    let truth = if paths.truth.exists() {
        let rows = read_table(&paths.truth, &TRUTH_HEADER, true)?;
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let quats = rows.iter().map(|r| [r[1], r[2], r[3], r[4]]).collect();
        let vel: Vec<_> = rows.iter().map(|r| v3(r, 5)).collect();
        let pos: Vec<_> = rows.iter().map(|r| v3(r, 8)).collect();
        Some(TruthSeries::from_records(&times, quats, &vel, &pos))
    } else {
        None
    };
    Ok(Dataset { truth, imu, gnss, odo })
}

/// Reads the standard file set from `dir`.
pub fn replay_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(&DatasetPaths::in_dir(dir))
}

/// Estimates in the truth schema followed by the covariance block traces.
pub fn write_estimates(path: impl AsRef<Path>, series: &EstimateSeries) -> Result<()> {
    let header: Vec<&str> = TRUTH_HEADER.iter().chain(&TRACE_HEADER).copied().collect();
    let bytes = render(
        &header,
        series.iter().map(|e| {
            let q = dcm_to_quat(&e.x.attitude);
            let (v, r) = (e.x.vel, e.x.pos);
            fmt_row([e.time, q[0], q[1], q[2], q[3], v.x, v.y, v.z, r.x, r.y, r.z].into_iter().chain(e.p_traces))
        }),
    )?;
    write_file(path.as_ref(), &bytes)
}

/// One row per yaw cell, one column per variant (attitude RMSE, deg).
pub fn write_sweep(path: impl AsRef<Path>, table: &SweepTable) -> Result<()> {
    let header: Vec<&str> = std::iter::once("yaw_deg").chain(table.variants.iter().map(|v| v.name())).collect();
    let bytes = render(
        &header,
        table.yaw.iter().zip(&table.rmse).map(|(&y, row)| fmt_row(std::iter::once(y).chain(row.iter().copied()))),
    )?;
    write_file(path.as_ref(), &bytes)
}
