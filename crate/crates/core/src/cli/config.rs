use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::errorstate::InjectionMode;
use crate::filter::CovPropagation;
use crate::sim::{FilterSettings, ImuSpec, ScenarioConfig, Trajectory, Variant};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    scenario: RawScenario,
    #[serde(default)]
    imu: RawImu,
    #[serde(default)]
    gnss: RawSensor,
    #[serde(default)]
    odo: RawSensor,
    #[serde(default)]
    filter: RawFilter,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    input: RawInput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration: Option<f64>,
    trajectory: Option<String>,
    radius: Option<f64>,
    speed: Option<f64>,
    heading: Option<f64>,
    size: Option<f64>,
    period: Option<f64>,
    points: Option<Vec<[f64; 2]>>,
    origin: Option<[f64; 3]>,
    initial_error: Option<[f64; 3]>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImu {
    preset: Option<String>,
    rate: Option<f64>,
    arw: Option<f64>,
    vrw: Option<f64>,
    gyro_bias: Option<f64>,
    accel_bias: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    enabled: Option<bool>,
    rate: Option<f64>,
    sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    variants: Option<Vec<String>>,
    injection: Option<String>,
    propagation: Option<String>,
    joseph: Option<bool>,
    init_vel_sigma: Option<f64>,
    init_pos_sigma: Option<f64>,
    min_att_sigma: Option<f64>,
    bias_time: Option<f64>,
    settle: Option<f64>,
    record_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    yaw_start: Option<f64>,
    yaw_stop: Option<f64>,
    yaw_step: Option<f64>,
    seeds: Option<usize>,
    jobs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    dataset: Option<PathBuf>,
}

/// Initial yaw errors and Monte Carlo size of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// deg
    pub yaw_start: f64,
    pub yaw_stop: f64,
    pub yaw_step: f64,
    pub seeds: usize,
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            yaw_start: -150.0,
            yaw_stop: 150.0,
            yaw_step: 5.0,
            seeds: 10,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl SweepConfig {
    /// Grid from start to stop inclusive.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let (a, b, h) = (self.yaw_start, self.yaw_stop, self.yaw_step);
        if !(a.is_finite() && b.is_finite() && h.is_finite()) || h <= 0.0 || b < a {
            return Err(Error::Config(format!(
                "sweep grid needs yaw_start <= yaw_stop and yaw_step > 0 (got {a}, {b}, {h})"
            )));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        if n > 100_000 {
            return Err(Error::Config(format!("sweep grid of {} cells is too large", n + 1)));
        }
        Ok((0..=n).map(|k| a + h * k as f64).collect())
    }
}

/// Everything a command needs, parsed and checked before any file is touched.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub filter: FilterSettings,
    pub sweep: SweepConfig,
    pub output: PathBuf,
    /// Replay this dataset directory instead of simulating.
    pub dataset: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            filter: FilterSettings::default(),
            sweep: SweepConfig::default(),
            output: PathBuf::from("out"),
            dataset: None,
        }
    }
}

fn parse_injection(s: &str) -> Result<InjectionMode> {
    s.parse().map_err(|e| Error::Config(format!("filter.injection: {e}")))
}

fn parse_propagation(s: &str) -> Result<CovPropagation> {
    match s {
        "euler" => Ok(CovPropagation::Euler),
        "transported" => Ok(CovPropagation::Transported),
        _ => Err(Error::Config(format!("filter.propagation: unknown mode '{s}' (expected euler or transported)"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let sc = &mut cfg.scenario;
        let s = raw.scenario;
        if let Some(v) = s.duration {
            sc.duration = v;
        }
        let kind = s.trajectory.as_deref().unwrap_or("circle");
        sc.trajectory = match kind {
            "stationary" => Trajectory::Stationary { heading: s.heading.unwrap_or(0.0) },
            "circle" => Trajectory::Circle { radius: s.radius.unwrap_or(50.0), speed: s.speed.unwrap_or(5.0) },
            "figure-eight" => {
                Trajectory::FigureEight { size: s.size.unwrap_or(100.0), period: s.period.unwrap_or(120.0) }
            }
            "waypoint" => Trajectory::Waypoint {
                points: s.points.ok_or_else(|| Error::Config("scenario.points is required for waypoint loops".into()))?,
                speed: s.speed.unwrap_or(5.0),
            },
            other => {
                return Err(Error::Config(format!(
                    "scenario.trajectory: unknown kind '{other}' (expected stationary, circle, figure-eight or waypoint)"
                )))
            }
        };
        if let Some(v) = s.origin {
            sc.origin = v;
        }
        if let Some(v) = s.initial_error {
            sc.initial_error = v;
        }
        if let Some(v) = s.seed {
            sc.seed = v;
        }

        let i = raw.imu;
        sc.imu = match i.preset.as_deref().unwrap_or("consumer") {
            "consumer" => ImuSpec::consumer(),
            "navigation" => ImuSpec::navigation(),
            "ideal" => ImuSpec::ideal(200.0),
            other => {
                return Err(Error::Config(format!(
                    "imu.preset: unknown preset '{other}' (expected consumer, navigation or ideal)"
                )))
            }
        };
        let imu = &mut sc.imu;
        for (slot, v) in [
            (&mut imu.rate, i.rate),
            (&mut imu.arw, i.arw),
            (&mut imu.vrw, i.vrw),
            (&mut imu.gyro_bias, i.gyro_bias),
            (&mut imu.accel_bias, i.accel_bias),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        let g = raw.gnss;
        sc.gnss = g.enabled.unwrap_or(sc.gnss);
        sc.gnss_rate = g.rate.unwrap_or(sc.gnss_rate);
        sc.gnss_sigma = g.sigma.unwrap_or(sc.gnss_sigma);
        let o = raw.odo;
        sc.odo = o.enabled.unwrap_or(sc.odo);
        sc.odo_rate = o.rate.unwrap_or(sc.odo_rate);
        sc.odo_sigma = o.sigma.unwrap_or(sc.odo_sigma);

        let f = raw.filter;
        let fs = &mut cfg.filter;
        if let Some(names) = f.variants {
            fs.variants = names.iter().map(|n| n.parse()).collect::<Result<Vec<Variant>>>()?;
        }
        if let Some(s) = f.injection {
            fs.injection = parse_injection(&s)?;
        }
        if let Some(s) = f.propagation {
            fs.propagation = parse_propagation(&s)?;
        }
        fs.joseph = f.joseph.unwrap_or(fs.joseph);
        fs.init_vel_sigma = f.init_vel_sigma.unwrap_or(fs.init_vel_sigma);
        fs.init_pos_sigma = f.init_pos_sigma.unwrap_or(fs.init_pos_sigma);
        fs.min_att_sigma = f.min_att_sigma.unwrap_or(fs.min_att_sigma);
        fs.bias_time = f.bias_time.unwrap_or(fs.bias_time);
        fs.settle = f.settle.unwrap_or(fs.settle);
        fs.record_every = f.record_every.unwrap_or(fs.record_every);

        let w = raw.sweep;
        let sw = &mut cfg.sweep;
        sw.yaw_start = w.yaw_start.unwrap_or(sw.yaw_start);
        sw.yaw_stop = w.yaw_stop.unwrap_or(sw.yaw_stop);
        sw.yaw_step = w.yaw_step.unwrap_or(sw.yaw_step);
        sw.seeds = w.seeds.unwrap_or(sw.seeds);
        sw.jobs = w.jobs.unwrap_or(sw.jobs);

        if let Some(dir) = raw.output.dir {
            cfg.output = dir;
        }
        cfg.dataset = raw.input.dataset;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let f = &self.filter;
        if f.variants.is_empty() {
            return Err(Error::Config("filter.variants must name at least one variant".into()));
        }
        for (name, v) in [
            ("filter.init_vel_sigma", f.init_vel_sigma),
            ("filter.init_pos_sigma", f.init_pos_sigma),
            ("filter.min_att_sigma", f.min_att_sigma),
            ("filter.bias_time", f.bias_time),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.sweep.seeds == 0 {
            return Err(Error::Config("sweep.seeds must be at least 1".into()));
        }
        if self.sweep.jobs == 0 {
            return Err(Error::Config("sweep.jobs must be at least 1".into()));
        }
        self.sweep.grid()?;
        Ok(())
    }
}
