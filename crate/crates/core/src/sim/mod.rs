//! Synthetic scenarios, sensor synthesis, dataset replay and Monte Carlo runs.

mod io;
mod run;
mod synth;
mod truth;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::ins::{EarthModel, ImuSample};
use crate::sensors::{GnssVelObs, Observation, OdoObs};

pub use io::{read_dataset, replay_dataset, write_dataset, write_estimates, write_sweep, DatasetPaths};
pub use run::{
    covariance_comparison, initial_condition, monte_carlo_sweep, run_dataset, run_filter, run_scenario,
    CovarianceSample, EstimateRecord, EstimateSeries, FilterSettings, InitialCondition, Metrics, RunOutcome,
    SweepTable, Variant,
};
pub use synth::{downsample_imu, synthesize_gnss, synthesize_imu, synthesize_odo, SyntheticImu};
pub use truth::{dcm_to_quat, generate_truth, quat_to_dcm, Kinematics, TruthSeries};

/// Standard gravity used by the µg unit conversion (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// IMU error figures in datasheet units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSpec {
    /// Angular random walk (deg/√h).
    pub arw: f64,
    /// Velocity random walk (µg/√Hz).
    pub vrw: f64,
    /// Gyro bias instability (deg/h).
    pub gyro_bias: f64,
    /// Accelerometer bias (µg).
    pub accel_bias: f64,
    /// Sample rate (Hz).
    pub rate: f64,
}

impl ImuSpec {
    /// Consumer-grade MEMS unit of a small land vehicle.
    pub fn consumer() -> Self {
        Self { arw: 0.15, vrw: 20.0, gyro_bias: 2.0, accel_bias: 3.6, rate: 200.0 }
    }

    /// Navigation-grade unit (white noise only).
    pub fn navigation() -> Self {
        Self { arw: 0.001, vrw: 5.0, gyro_bias: 0.0, accel_bias: 0.0, rate: 100.0 }
    }

    pub fn ideal(rate: f64) -> Self {
        Self { arw: 0.0, vrw: 0.0, gyro_bias: 0.0, accel_bias: 0.0, rate }
    }

    /// rad/√s
    pub fn arw_si(&self) -> f64 {
        self.arw.to_radians() / 60.0
    }

    /// m/s²/√Hz
    pub fn vrw_si(&self) -> f64 {
        self.vrw * 1e-6 * STANDARD_GRAVITY
    }

    /// rad/s
    pub fn gyro_bias_si(&self) -> f64 {
        self.gyro_bias.to_radians() / 3600.0
    }

    /// m/s²
    pub fn accel_bias_si(&self) -> f64 {
        self.accel_bias * 1e-6 * STANDARD_GRAVITY
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.arw, self.vrw, self.gyro_bias, self.accel_bias];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("IMU noise figures must be finite and non-negative".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::Config(format!("IMU rate {} must be positive", self.rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trajectory {
    /// Parked with a fixed heading (deg).
    Stationary { heading: f64 },
    /// Constant-speed circle, turning right.
    Circle { radius: f64, speed: f64 },
    /// Lissajous figure eight of half-width `size` traversed in `period` seconds.
    FigureEight { size: f64, period: f64 },
    /// Closed smooth loop through north/east waypoints (m) at roughly `speed`.
    Waypoint { points: Vec<[f64; 2]>, speed: f64 },
}

impl Trajectory {
    pub fn name(&self) -> &'static str {
        match self {
            Trajectory::Stationary { .. } => "stationary",
            Trajectory::Circle { .. } => "circle",
            Trajectory::FigureEight { .. } => "figure-eight",
            Trajectory::Waypoint { .. } => "waypoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// s
    pub duration: f64,
    pub trajectory: Trajectory,
    /// Geodetic origin of the local track: latitude, longitude (deg), height (m).
    pub origin: [f64; 3],
    pub imu: ImuSpec,
    pub gnss: bool,
    pub gnss_rate: f64,
    /// m/s, per axis
    pub gnss_sigma: f64,
    pub odo: bool,
    pub odo_rate: f64,
    pub odo_sigma: f64,
    /// Initial roll, pitch and yaw errors of the estimate (deg).
    pub initial_error: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 100.0,
            trajectory: Trajectory::Circle { radius: 50.0, speed: 5.0 },
            origin: [30.5, 114.35, 20.0],
            imu: ImuSpec::consumer(),
            gnss: true,
            gnss_rate: 1.0,
            gnss_sigma: 0.2,
            odo: false,
            odo_rate: 10.0,
            odo_sigma: 0.1,
            initial_error: [60.0, 60.0, 120.0],
            seed: 1,
        }
    }
}

fn divides(rate: f64, sub: f64) -> bool {
    let q = rate / sub;
    (q - q.round()).abs() < 1e-9 && q.round() >= 1.0
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration {} must be positive", self.duration)));
        }
        self.imu.validate()?;
        for (on, rate, sigma, name) in [
            (self.gnss, self.gnss_rate, self.gnss_sigma, "gnss"),
            (self.odo, self.odo_rate, self.odo_sigma, "odo"),
        ] {
            if !on {
                continue;
            }
            if !divides(self.imu.rate, rate) {
                return Err(Error::Config(format!(
                    "{name} rate {rate} Hz does not divide the IMU rate {} Hz",
                    self.imu.rate
                )));
            }
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config(format!("{name} sigma {sigma} must be non-negative")));
            }
        }
        match &self.trajectory {
            Trajectory::Circle { radius, speed } if !(*radius > 0.0 && *speed > 0.0) => {
                Err(Error::Config("circle radius and speed must be positive".into()))
            }
            Trajectory::FigureEight { size, period } if !(*size > 0.0 && *period > 0.0) => {
                Err(Error::Config("figure-eight size and period must be positive".into()))
            }
            Trajectory::Waypoint { points, speed } if points.len() < 3 || !(*speed > 0.0) => {
                Err(Error::Config("waypoint loops need at least three points and a positive speed".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Everything a filter run consumes, plus the truth when known.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub truth: Option<TruthSeries>,
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssVelObs>,
    pub odo: Vec<OdoObs>,
}

impl Dataset {
    /// Observations merged by time; GNSS first on ties.
    pub fn observations(&self) -> Vec<Observation> {
        let mut all: Vec<Observation> = self.gnss.iter().map(|&o| o.into()).collect();
        all.extend(self.odo.iter().map(|&o| Observation::from(o)));
        // stable sort keeps GNSS ahead of odometer samples with the same stamp
        all.sort_by(|a, b| a.time().total_cmp(&b.time()));
        all
    }

    /// Copy with only the selected observation kinds.
    pub fn with_sensors(&self, gnss: bool, odo: bool) -> Dataset {
        Dataset {
            truth: self.truth.clone(),
            imu: self.imu.clone(),
            gnss: if gnss { self.gnss.clone() } else { Vec::new() },
            odo: if odo { self.odo.clone() } else { Vec::new() },
        }
    }
}

/// Truth plus synthetic sensors for a scenario, all seeded from `cfg.seed`.
pub fn simulate(cfg: &ScenarioConfig, earth: &EarthModel) -> Result<Dataset> {
    cfg.validate()?;
    let mut truth = generate_truth(cfg, earth)?;
    let imu = synthesize_imu(&truth, &cfg.imu, cfg.seed, earth)?;
    for s in &mut truth.states {
        s.bg = imu.gyro_bias;
        s.ba = imu.accel_bias;
    }
    let gnss = if cfg.gnss {
        synthesize_gnss(&truth, Vector3::repeat(cfg.gnss_sigma), cfg.gnss_rate, cfg.seed)?
    } else {
        Vec::new()
    };
    let odo = if cfg.odo {
        synthesize_odo(&truth, Vector3::repeat(cfg.odo_sigma), cfg.odo_rate, cfg.seed)?
    } else {
        Vec::new()
    };
    Ok(Dataset { truth: Some(truth), imu: imu.samples, gnss, odo })
}
