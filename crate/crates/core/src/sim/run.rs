use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::{simulate, Dataset, ScenarioConfig};
use crate::error::{Error, Result};
use crate::errorstate::{ErrorParameterization, InjectionMode, Matrix15, ProcessNoise, ATT, BA, BG, POS, VEL};
use crate::filter::{self, CovPropagation, FilterConfig, FilterState, Strategy, Targets};
use crate::ins::{self, EarthModel, NavState};
use crate::lie;
use crate::sensors::Observation;

/// Filter configurations that can be run side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Ekf,
    LeftInvariant,
    RightInvariant,
    /// EKF with covariance transformation (GNSS → left, odometer → right).
    CtEkf,
    /// EKF with covariance switch, same targets as [`Variant::CtEkf`].
    SwEkf,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Self::Ekf, Self::LeftInvariant, Self::RightInvariant, Self::CtEkf, Self::SwEkf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ekf => "ekf",
            Variant::LeftInvariant => "l-inekf",
            Variant::RightInvariant => "r-inekf",
            Variant::CtEkf => "ct-ekf",
            Variant::SwEkf => "sw-ekf",
        }
    }

    pub fn param(self) -> ErrorParameterization {
        match self {
            Variant::LeftInvariant => ErrorParameterization::LeftInvariant,
            Variant::RightInvariant => ErrorParameterization::RightInvariant,
            _ => ErrorParameterization::AdditiveEkf,
        }
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Variant::CtEkf => Strategy::Transform(Targets::mixed()),
            Variant::SwEkf => Strategy::Switch(Targets::mixed()),
            _ => Strategy::Plain,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown filter variant '{s}' (expected ekf, l-inekf, r-inekf, ct-ekf or sw-ekf)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterSettings {
    pub variants: Vec<Variant>,
    pub injection: InjectionMode,
    pub propagation: CovPropagation,
    pub joseph: bool,
    /// Initial velocity and position standard deviations (m/s, m).
    pub init_vel_sigma: f64,
    pub init_pos_sigma: f64,
    /// Floor for the initial attitude standard deviation of each axis (deg).
    pub min_att_sigma: f64,
    /// Correlation time behind the bias random-walk densities (s).
    pub bias_time: f64,
    /// Errors before this time are left out of the RMSE (s).
    pub settle: f64,
    /// Keep every n-th epoch in the estimate series; 0 keeps none.
    pub record_every: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Ekf, Variant::LeftInvariant, Variant::RightInvariant, Variant::CtEkf],
            injection: InjectionMode::Retraction,
            propagation: CovPropagation::Transported,
            joseph: false,
            init_vel_sigma: 0.5,
            init_pos_sigma: 2.0,
            min_att_sigma: 1.0,
            bias_time: 3600.0,
            settle: 0.0,
            record_every: 1,
        }
    }
}

impl FilterSettings {
    pub fn filter_config(&self, variant: Variant, noise: ProcessNoise, earth: EarthModel) -> FilterConfig {
        FilterConfig::new(variant.param(), noise, earth)
            .with_strategy(variant.strategy())
            .with_injection(self.injection)
            .with_propagation(self.propagation)
            .with_joseph(self.joseph)
    }
}

/// Shared starting point of every filter in a run.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub x0: NavState,
    /// Initial covariance in the EKF parameterization.
    pub p_ekf: Matrix15,
    pub noise: ProcessNoise,
    /// `C_n^e` at the start position, used to resolve attitude errors.
    pub ned: Matrix3<f64>,
}

fn euler_from(c_bn: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        c_bn[(2, 1)].atan2(c_bn[(2, 2)]),
        (-c_bn[(2, 0)]).clamp(-1.0, 1.0).asin(),
        c_bn[(1, 0)].atan2(c_bn[(0, 0)]),
    )
}

fn dcm_from_euler(e: &Vector3<f64>) -> Matrix3<f64> {
    let (sr, cr) = e.x.sin_cos();
    let (sp, cp) = e.y.sin_cos();
    let (sy, cy) = e.z.sin_cos();
    Matrix3::new(
        cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
        sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
        -sp, cp * sr, cp * cr,
    )
}

/// Estimate at the first truth epoch: attitude offset by the configured roll,
/// pitch and yaw errors, exact velocity and position, zero biases. The
/// attitude block of the covariance holds the squared errors on the local
/// level axes, rotated into the e frame.
pub fn initial_condition(
    truth0: &NavState,
    cfg: &ScenarioConfig,
    settings: &FilterSettings,
    earth: &EarthModel,
) -> InitialCondition {
    let (lat, lon, _) = ins::ecef_to_geodetic(&truth0.pos);
    let ned = ins::ned_to_ecef(lat, lon);
    let err = Vector3::from(cfg.initial_error).map(f64::to_radians);
    let euler = euler_from(&(ned.transpose() * truth0.attitude));
    let mut x0 = NavState::new(ned * dcm_from_euler(&(euler + err)), truth0.vel, truth0.pos, truth0.time);
    x0.attitude = lie::orthonormalize(&x0.attitude);
    let floor = settings.min_att_sigma.to_radians();
    let sig = err.map(|e| e.abs().max(floor));
    let mut p = Matrix15::zeros();
    let att = ned * Matrix3::from_diagonal(&sig.component_mul(&sig)) * ned.transpose();
    p.fixed_view_mut::<3, 3>(ATT, ATT).copy_from(&att);
    let diag = |p: &mut Matrix15, at: usize, s: f64| {
        for i in 0..3 {
            p[(at + i, at + i)] = s * s;
        }
    };
    diag(&mut p, VEL, settings.init_vel_sigma);
    diag(&mut p, POS, settings.init_pos_sigma);
    diag(&mut p, BG, cfg.imu.gyro_bias_si().max(1e-9));
    diag(&mut p, BA, cfg.imu.accel_bias_si().max(1e-9));
    let _ = earth;
    InitialCondition { x0, p_ekf: p, noise: ProcessNoise::from_spec(&cfg.imu, settings.bias_time), ned }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRecord {
    pub time: f64,
    pub x: NavState,
    /// Traces of the attitude, velocity, position and bias blocks of `P`, in
    /// the filter's own parameterization.
    pub p_traces: [f64; 5],
    /// Attitude error on the local level axes (deg), when truth is known.
    pub att_err: Option<Vector3<f64>>,
}

pub type EstimateSeries = Vec<EstimateRecord>;

pub fn block_traces(p: &Matrix15) -> [f64; 5] {
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|i| p[(3 * k + i, 3 * k + i)]).sum();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Metrics {
    /// Attitude RMSE per local level axis (deg).
    pub att_rmse: Vector3<f64>,
    /// Root of the summed per-axis mean squares (deg).
    pub att_rmse_total: f64,
    pub vel_rmse: f64,
    pub pos_rmse: f64,
    /// Attitude error at the last epoch with truth (deg).
    pub final_att_err: Vector3<f64>,
    /// Epochs that entered the RMSE.
    pub samples: usize,
}

#[derive(Default)]
struct Accumulator {
    att: Vector3<f64>,
    vel: f64,
    pos: f64,
    n: usize,
    last: Vector3<f64>,
}

impl Accumulator {
    fn finish(&self) -> Metrics {
        let n = self.n.max(1) as f64;
        let att = (self.att / n).map(f64::sqrt);
        Metrics {
            att_rmse: att,
            att_rmse_total: (self.att.sum() / n).sqrt(),
            vel_rmse: (self.vel / n).sqrt(),
            pos_rmse: (self.pos / n).sqrt(),
            final_att_err: self.last,
            samples: self.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub variant: Variant,
    pub metrics: Metrics,
    pub series: EstimateSeries,
    /// Why the run stopped early, if it did.
    pub diverged: Option<String>,
}

impl RunOutcome {
    /// RMSE used to rank variants; a diverged run ranks last.
    pub fn score(&self) -> f64 {
        if self.diverged.is_some() {
            f64::INFINITY
        } else {
            self.metrics.att_rmse_total
        }
    }
}

/// Runs one variant over a dataset. Filter failures end the run and are
/// reported as divergence rather than as an error.
pub fn run_filter(
    ds: &Dataset,
    obs: &[Observation],
    variant: Variant,
    init: &InitialCondition,
    settings: &FilterSettings,
    earth: &EarthModel,
) -> RunOutcome {
    let cfg = settings.filter_config(variant, init.noise, *earth);
    let mut fs = FilterState::from_ekf_covariance(init.x0, &init.p_ekf, cfg);
    let mut acc = Accumulator::default();
    let mut series = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0usize;
    let ned_t = init.ned.transpose();
    let result = filter::drive(&mut fs, &ds.imu, obs, |fs, _| {
        let truth = ds.truth.as_ref().and_then(|t| t.at(fs.x.time, &mut cursor, 1e-6));
        let att_err = truth.map(|t| {
            let e = ned_t * lie::so3_log(&(fs.x.attitude * t.attitude.transpose()));
            let e = e.map(f64::to_degrees);
            if fs.x.time >= settings.settle - 1e-9 {
                acc.att += e.component_mul(&e);
                acc.vel += (fs.x.vel - t.vel).norm_squared();
                acc.pos += (fs.x.pos - t.pos).norm_squared();
                acc.n += 1;
            }
            acc.last = e;
            e
        });
        if settings.record_every > 0 && epoch.is_multiple_of(settings.record_every) {
            series.push(EstimateRecord { time: fs.x.time, x: fs.x, p_traces: block_traces(&fs.p), att_err });
        }
        epoch += 1;
        Ok(())
    });
    RunOutcome { variant, metrics: acc.finish(), series, diverged: result.err().map(|e| e.to_string()) }
}

/// Runs every configured variant over a dataset that carries truth.
pub fn run_dataset(
    ds: &Dataset,
    cfg: &ScenarioConfig,
    settings: &FilterSettings,
    earth: &EarthModel,
) -> Result<Vec<RunOutcome>> {
    let truth0 = ds
        .truth
        .as_ref()
        .and_then(|t| t.states.first())
        .ok_or_else(|| Error::Config("a run needs at least one truth record for the initial state".into()))?;
    let init = initial_condition(truth0, cfg, settings, earth);
    let obs = ds.observations();
    Ok(settings.variants.iter().map(|&v| run_filter(ds, &obs, v, &init, settings, earth)).collect())
}

/// Simulates the scenario and runs every configured variant on it.
pub fn run_scenario(cfg: &ScenarioConfig, settings: &FilterSettings, earth: &EarthModel) -> Result<Vec<RunOutcome>> {
    let ds = simulate(cfg, earth)?;
    run_dataset(&ds, cfg, settings, earth)
}

/// Per-cell attitude RMSE of each variant over a Monte Carlo yaw sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    /// Initial yaw error of each cell (deg).
    pub yaw: Vec<f64>,
    pub variants: Vec<Variant>,
    /// `rmse[cell][variant]` (deg); infinite when any seed diverged.
    pub rmse: Vec<Vec<f64>>,
    /// Per-axis RMSE, same indexing (deg).
    pub axis_rmse: Vec<Vec<Vector3<f64>>>,
    /// Diverged seeds per cell and variant.
    pub diverged: Vec<Vec<usize>>,
}

impl SweepTable {
    pub fn column(&self, variant: Variant) -> Option<Vec<f64>> {
        let j = self.variants.iter().position(|&v| v == variant)?;
        Some(self.rmse.iter().map(|row| row[j]).collect())
    }
}

/// Seed of one Monte Carlo member.
pub fn member_seed(base: u64, cell: usize, member: usize) -> u64 {
    base ^ ((cell as u64) << 32) ^ member as u64
}

/// Runs `seeds` noise realizations for every initial yaw error in `yaw_grid`
/// with `jobs` worker threads. Results are merged in cell order.
pub fn monte_carlo_sweep(
    base: &ScenarioConfig,
    settings: &FilterSettings,
    yaw_grid: &[f64],
    seeds: usize,
    jobs: usize,
    earth: &EarthModel,
) -> Result<SweepTable> {
    if yaw_grid.is_empty() || seeds == 0 {
        return Err(Error::Config("a sweep needs at least one yaw cell and one seed".into()));
    }
    base.validate()?;
    let settings = FilterSettings { record_every: 0, ..settings.clone() };
    let tasks: Vec<(usize, usize)> = (0..yaw_grid.len()).flat_map(|c| (0..seeds).map(move |s| (c, s))).collect();
    let work = |&(cell, member): &(usize, usize)| -> Result<Vec<RunOutcome>> {
        let mut cfg = base.clone();
        cfg.initial_error[2] = yaw_grid[cell];
        cfg.seed = member_seed(base.seed, cell, member);
        run_scenario(&cfg, &settings, earth)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<RunOutcome>>> = pool.install(|| tasks.par_iter().map(work).collect());
    let nv = settings.variants.len();
    let mut sums = vec![vec![Vector3::zeros(); nv]; yaw_grid.len()];
    let mut diverged = vec![vec![0usize; nv]; yaw_grid.len()];
    for (&(cell, _), outcome) in tasks.iter().zip(results) {
        for (j, run) in outcome?.iter().enumerate() {
            if run.diverged.is_some() {
                diverged[cell][j] += 1;
            } else {
                sums[cell][j] += run.metrics.att_rmse.component_mul(&run.metrics.att_rmse);
            }
        }
    }
    let n = seeds as f64;
    let axis_rmse: Vec<Vec<Vector3<f64>>> =
        sums.iter().map(|row| row.iter().map(|s| (s / n).map(f64::sqrt)).collect()).collect();
    let rmse = axis_rmse
        .iter()
        .zip(&diverged)
        .map(|(row, div)| {
            row.iter().zip(div).map(|(a, &d)| if d > 0 { f64::INFINITY } else { a.norm() }).collect()
        })
        .collect();
    Ok(SweepTable { yaw: yaw_grid.to_vec(), variants: settings.variants.clone(), rmse, axis_rmse, diverged })
}

/// Block traces of several filters' covariances, each converted to the
/// left-invariant parameterization at its own state.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceSample {
    pub time: f64,
    pub traces: Vec<[f64; 5]>,
}

/// Propagates one filter per parameterization over `ds` from equivalent
/// initial covariances and samples every `every`-th epoch.
pub fn covariance_comparison(
    params: &[ErrorParameterization],
    ds: &Dataset,
    init: &InitialCondition,
    settings: &FilterSettings,
    earth: &EarthModel,
    every: usize,
) -> Result<Vec<CovarianceSample>> {
    let every = every.max(1);
    let obs = ds.observations();
    let mut per_filter: Vec<Vec<(f64, [f64; 5])>> = Vec::new();
    for &param in params {
        let cfg = FilterConfig::new(param, init.noise, *earth)
            .with_injection(settings.injection)
            .with_propagation(settings.propagation)
            .with_joseph(settings.joseph);
        let mut fs = FilterState::from_ekf_covariance(init.x0, &init.p_ekf, cfg);
        let mut out = Vec::new();
        let mut epoch = 0usize;
        filter::drive(&mut fs, &ds.imu, &obs, |fs, _| {
            if epoch.is_multiple_of(every) {
                out.push((fs.x.time, block_traces(&fs.covariance_in(ErrorParameterization::LeftInvariant))));
            }
            epoch += 1;
            Ok(())
        })?;
        per_filter.push(out);
    }
    let n = per_filter.first().map_or(0, Vec::len);
    Ok((0..n)
        .map(|k| CovarianceSample { time: per_filter[0][k].0, traces: per_filter.iter().map(|f| f[k].1).collect() })
        .collect())
}
