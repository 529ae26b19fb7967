//! Continuous-discrete error-state Kalman filter with plain, covariance-switch
//! and covariance-transformation updates.

use nalgebra::{Cholesky, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::errorstate::{
    self, ErrorParameterization, ErrorVec15, InjectionMode, Matrix15, ProcessNoise,
};
use crate::ins::{self, EarthModel, ImuSample, NavState};
use crate::lie;
use crate::sensors::{self, ObsKind, Observation};

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Target parameterization per observation kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Targets {
    pub gnss: ErrorParameterization,
    pub odo: ErrorParameterization,
}

impl Targets {
    pub fn same(p: ErrorParameterization) -> Self {
        Self { gnss: p, odo: p }
    }

    /// GNSS velocity to left-invariant, odometer to right-invariant.
    pub fn mixed() -> Self {
        Self { gnss: ErrorParameterization::LeftInvariant, odo: ErrorParameterization::RightInvariant }
    }

    pub fn for_kind(&self, kind: ObsKind) -> ErrorParameterization {
        match kind {
            ObsKind::GnssVel => self.gnss,
            ObsKind::Odo => self.odo,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Plain,
    Switch(Targets),
    Transform(Targets),
}

/// How the covariance transition over one IMU interval is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CovPropagation {
    /// `Φ = I + F dt` from the parameterization's own `F`, noise `G Qc Gᵀ dt`.
    Euler,
    /// The EKF transition carried into the filter's parameterization by the
    /// relation matrices at both ends of the interval,
    /// `Φ = A(x̂ₖ₊₁) (I + F_ekf dt) A(x̂ₖ)⁻¹`, noise `G(x̂ₖ₊₁) Qc G(x̂ₖ₊₁)ᵀ dt`.
    /// Equivalent covariances stay exactly equivalent after propagation.
    #[default]
    Transported,
}

/// Where the backward switch of [`FilterState::update_switch_at`] is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardAt {
    Updated,
    /// Using the predicted state undoes the forward switch exactly; kept to
    /// demonstrate that.
    Predicted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterConfig {
    pub param: ErrorParameterization,
    pub strategy: Strategy,
    pub injection: InjectionMode,
    pub propagation: CovPropagation,
    /// Joseph-form covariance update instead of `P − KHP`.
    pub joseph: bool,
    pub noise: ProcessNoise,
    pub earth: EarthModel,
}

impl FilterConfig {
    pub fn new(param: ErrorParameterization, noise: ProcessNoise, earth: EarthModel) -> Self {
        Self {
            param,
            strategy: Strategy::Plain,
            injection: InjectionMode::default(),
            propagation: CovPropagation::default(),
            joseph: false,
            noise,
            earth,
        }
    }

    pub fn with_strategy(self, strategy: Strategy) -> Self {
        Self { strategy, ..self }
    }

    pub fn with_injection(self, injection: InjectionMode) -> Self {
        Self { injection, ..self }
    }

    pub fn with_propagation(self, propagation: CovPropagation) -> Self {
        Self { propagation, ..self }
    }

    pub fn with_joseph(self, joseph: bool) -> Self {
        Self { joseph, ..self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Applied {
    None,
    Switch { forward: Box<Matrix15>, backward: Box<Matrix15> },
    Transform(Box<Matrix15>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateReport {
    pub kind: ObsKind,
    pub innovation: nalgebra::Vector3<f64>,
    /// Frobenius norm of the gain.
    pub gain_norm: f64,
    /// Error estimate injected into the state, in the update's parameterization.
    pub correction: ErrorVec15,
    pub trace_before: f64,
    pub trace_after: f64,
    pub applied: Applied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub x: NavState,
    /// Covariance of the error in `config.param`.
    pub p: Matrix15,
    pub config: FilterConfig,
    last_dt: Option<f64>,
    // half-width of the window in which observations count as current
    window: f64,
}

struct Step {
    x: NavState,
    p: Matrix15,
    innovation: nalgebra::Vector3<f64>,
    gain_norm: f64,
    correction: ErrorVec15,
}

pub fn symmetrize(p: &Matrix15) -> Matrix15 {
    (p + p.transpose()) * 0.5
}

impl FilterState {
    pub fn new(x: NavState, p: Matrix15, config: FilterConfig) -> Self {
        Self { x, p, config, last_dt: None, window: 0.0 }
    }

    /// Starts from a covariance given in the EKF parameterization, converted
    /// into the filter's own so that differently parameterized filters start
    /// from equivalent uncertainty.
    pub fn from_ekf_covariance(x: NavState, p_ekf: &Matrix15, config: FilterConfig) -> Self {
        let p = errorstate::convert_covariance(
            p_ekf,
            ErrorParameterization::AdditiveEkf,
            config.param,
            &x,
            &config.earth,
        );
        Self::new(x, symmetrize(&p), config)
    }

    pub fn param(&self) -> ErrorParameterization {
        self.config.param
    }

    /// Covariance expressed in another parameterization at the current state.
    pub fn covariance_in(&self, param: ErrorParameterization) -> Matrix15 {
        errorstate::convert_covariance(&self.p, self.config.param, param, &self.x, &self.config.earth)
    }

    /// Largest accepted offset between an observation stamp and the filter
    /// time: half the last step or the announced observation window, whichever
    /// is wider.
    pub fn time_tolerance(&self) -> f64 {
        let half = self.last_dt.map_or(0.0, |dt| 0.5 * dt).max(self.window);
        half * (1.0 + 1e-9) + 1e-9
    }

    /// Widens the observation window to `half_width` around the current
    /// epoch, e.g. half of the step that follows. Reset by the next propagation.
    pub fn set_observation_window(&mut self, half_width: f64) {
        self.window = half_width.max(0.0);
    }

    /// Step length of the last propagation.
    pub fn last_step(&self) -> Option<f64> {
        self.last_dt
    }

    fn check_finite(&self) -> Result<()> {
        if !self.x.is_finite() {
            return Err(Error::NonFinite("state"));
        }
        if !self.p.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        Ok(())
    }

    pub fn propagate(&mut self, u: &ImuSample, dt: f64) -> Result<()> {
        let cfg = &self.config;
        let earth = &cfg.earth;
        let x0 = self.x;
        let uc = u.corrected(&x0);
        let x1 = ins::propagate_state(&x0, u, dt, earth)?;
        let i15 = Matrix15::identity();
        let (phi, q) = match (cfg.propagation, cfg.param) {
            (CovPropagation::Euler, param) | (CovPropagation::Transported, param @ ErrorParameterization::AdditiveEkf) => {
                let s = errorstate::system_matrix(param, &x0, &uc, earth, &cfg.noise)?;
                (i15 + s.f * dt, s.g * s.qc * s.g.transpose() * dt)
            }
            (CovPropagation::Transported, param) => {
                let ekf = ErrorParameterization::AdditiveEkf;
                let s0 = errorstate::system_matrix(ekf, &x0, &uc, earth, &cfg.noise)?;
                let a0 = errorstate::relation_matrix(ekf, param, &x0, earth);
                let a0_inv = errorstate::relation_matrix(param, ekf, &x0, earth);
                let da = errorstate::relation_increment(param, &x1, &x0, earth);
                let m = s0.f * dt;
                // A₁(I + M)A₀⁻¹ = I + A₀MA₀⁻¹ + (A₁ − A₀)(I + M)A₀⁻¹, which avoids
                // subtracting Earth-radius products
                let phi = i15 + a0 * m * a0_inv + da * (i15 + m) * a0_inv;
                let g1 = (a0 + da) * errorstate::system_matrix(ekf, &x1, &uc, earth, &cfg.noise)?.g;
                (phi, g1 * s0.qc * g1.transpose() * dt)
            }
        };
        self.p = symmetrize(&(phi * self.p * phi.transpose() + q));
        self.x = x1;
        self.x.time = u.time;
        self.last_dt = Some(dt);
        self.window = 0.0;
        self.check_finite()
    }

    fn kalman_step(&self, obs: &Observation, param: ErrorParameterization, p: &Matrix15) -> Result<Step> {
        let cfg = &self.config;
        let dz = sensors::innovation(&self.x, obs, self.time_tolerance())?;
        let h = sensors::observation_matrix(param, &self.x, obs.kind(), &cfg.earth);
        let r = sensors::noise_covariance(obs);
        let hp = h * p;
        let s: Matrix3<f64> = hp * h.transpose() + r;
        let s = (s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
            return Err(Error::SingularInnovation(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
        }
        let chol = Cholesky::new(s).ok_or(Error::SingularInnovation(f64::INFINITY))?;
        // S Kᵀ = H P
        let k = chol.solve(&hp).transpose();
        let xi = k * dz;
        let x = errorstate::inject_error(param, &self.x, &xi, cfg.injection, &cfg.earth)?;
        let p_new = if cfg.joseph {
            let ikh = Matrix15::identity() - k * h;
            ikh * p * ikh.transpose() + k * r * k.transpose()
        } else {
            p - k * hp
        };
        Ok(Step { x, p: symmetrize(&p_new), innovation: dz, gain_norm: k.norm(), correction: xi })
    }

    fn finish(&mut self, step: Step, p: Matrix15, kind: ObsKind, applied: Applied) -> Result<UpdateReport> {
        let trace_before = self.p.trace();
        self.x = step.x;
        self.p = symmetrize(&p);
        self.check_finite()?;
        Ok(UpdateReport {
            kind,
            innovation: step.innovation,
            gain_norm: step.gain_norm,
            correction: step.correction,
            trace_before,
            trace_after: self.p.trace(),
            applied,
        })
    }

    /// Kalman update in the filter's own parameterization.
    pub fn update_plain(&mut self, obs: &Observation) -> Result<UpdateReport> {
        let step = self.kalman_step(obs, self.config.param, &self.p)?;
        let p = step.p;
        self.finish(step, p, obs.kind(), Applied::None)
    }

    /// Covariance switch: forward to `target` at the predicted state, update
    /// there, and switch back at the updated state.
    pub fn update_switch(&mut self, obs: &Observation, target: ErrorParameterization) -> Result<UpdateReport> {
        self.update_switch_at(obs, target, BackwardAt::Updated)
    }

    pub fn update_switch_at(
        &mut self,
        obs: &Observation,
        target: ErrorParameterization,
        backward: BackwardAt,
    ) -> Result<UpdateReport> {
        let own = self.config.param;
        let earth = self.config.earth;
        let forward = errorstate::relation_matrix(own, target, &self.x, &earth);
        let p_target = symmetrize(&(forward * self.p * forward.transpose()));
        let step = self.kalman_step(obs, target, &p_target)?;
        let at = match backward {
            BackwardAt::Updated => &step.x,
            BackwardAt::Predicted => &self.x,
        };
        let back = errorstate::relation_matrix(target, own, at, &earth);
        let p = back * step.p * back.transpose();
        self.finish(step, p, obs.kind(), Applied::Switch { forward: Box::new(forward), backward: Box::new(back) })
    }

    /// Covariance transformation: plain update, then `P ← T P Tᵀ` with
    /// `T = A⁻¹(x̂⁺) A(x̂⁻)` for the `own → target` relation.
    pub fn update_transform(&mut self, obs: &Observation, target: ErrorParameterization) -> Result<UpdateReport> {
        let own = self.config.param;
        let step = self.kalman_step(obs, own, &self.p)?;
        let t = errorstate::transformation_matrix(own, target, &step.x, &self.x, &self.config.earth);
        let p = t * step.p * t.transpose();
        self.finish(step, p, obs.kind(), Applied::Transform(Box::new(t)))
    }

    /// Update according to the configured strategy.
    pub fn update(&mut self, obs: &Observation) -> Result<UpdateReport> {
        match self.config.strategy {
            Strategy::Plain => self.update_plain(obs),
            Strategy::Switch(t) => self.update_switch(obs, t.for_kind(obs.kind())),
            Strategy::Transform(t) => self.update_transform(obs, t.for_kind(obs.kind())),
        }
    }
}

/// Per-block difference between two estimates.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct StateDiscrepancy {
    /// Angle of the relative rotation (rad).
    pub attitude: f64,
    /// m/s
    pub vel: f64,
    /// m
    pub pos: f64,
    /// Largest of the gyro (rad/s) and accelerometer (m/s²) bias differences.
    pub bias: f64,
    // magnitudes used by `scaled`
    vel_scale: f64,
    pos_scale: f64,
}

impl StateDiscrepancy {
    pub fn between(a: &NavState, b: &NavState) -> Self {
        Self {
            attitude: lie::so3_log(&(a.attitude * b.attitude.transpose())).norm(),
            vel: (a.vel - b.vel).norm(),
            pos: (a.pos - b.pos).norm(),
            bias: (a.bg - b.bg).norm().max((a.ba - b.ba).norm()),
            vel_scale: a.vel.norm().max(b.vel.norm()).max(1.0),
            pos_scale: a.pos.norm().max(b.pos.norm()).max(1.0),
        }
    }

    /// Largest block difference in plain units.
    pub fn max_abs(&self) -> f64 {
        self.attitude.max(self.vel).max(self.pos).max(self.bias)
    }

    /// Largest block difference with velocity and position taken relative to
    /// their magnitude (at least 1 m/s, 1 m). At Earth-centred positions one
    /// unit in the last place is about 1e-9 m, so absolute position
    /// differences cannot resolve below that.
    pub fn scaled(&self) -> f64 {
        self.attitude.max(self.vel / self.vel_scale).max(self.pos / self.pos_scale).max(self.bias)
    }

    /// Block-wise maximum of two discrepancies.
    pub fn max(self, o: Self) -> Self {
        let pick = |a: f64, sa: f64, b: f64, sb: f64| if a / sa >= b / sb { (a, sa) } else { (b, sb) };
        let (vel, vel_scale) = pick(self.vel, self.vel_scale, o.vel, o.vel_scale);
        let (pos, pos_scale) = pick(self.pos, self.pos_scale, o.pos, o.pos_scale);
        Self {
            attitude: self.attitude.max(o.attitude),
            vel,
            pos,
            bias: self.bias.max(o.bias),
            vel_scale,
            pos_scale,
        }
    }
}

/// Largest per-block difference between two states in plain units.
pub fn state_difference(a: &NavState, b: &NavState) -> f64 {
    StateDiscrepancy::between(a, b).max_abs()
}

/// Half-width of the observation window at epoch `k` of an IMU stream that
/// starts at `t0`: observations are assigned to the nearest epoch.
fn epoch_window(t0: f64, imu: &[ImuSample], k: usize) -> f64 {
    let prev = if k == 0 { t0 } else { imu[k - 1].time };
    let here = if k == 0 { None } else { Some(imu[k - 1].time - if k >= 2 { imu[k - 2].time } else { t0 }) };
    let next = imu.get(k).map(|u| u.time - prev);
    0.5 * next.or(here).unwrap_or(0.0)
}

/// Feeds one filter with IMU samples and time-ordered observations. Each
/// observation is applied at the IMU epoch nearest to its stamp.
/// `on_epoch` runs after every epoch with the reports of that epoch's updates.
pub fn drive<F>(fs: &mut FilterState, imu: &[ImuSample], obs: &[Observation], mut on_epoch: F) -> Result<()>
where
    F: FnMut(&FilterState, &[UpdateReport]) -> Result<()>,
{
    let t0 = fs.x.time;
    let mut next = 0;
    let mut reports = Vec::new();
    for k in 0..=imu.len() {
        if k > 0 {
            let u = &imu[k - 1];
            let dt = u.time - fs.x.time;
            fs.propagate(u, dt)?;
        }
        reports.clear();
        let half = epoch_window(t0, imu, k);
        fs.set_observation_window(half);
        while next < obs.len() && obs[next].time() <= fs.x.time + half {
            reports.push(fs.update(&obs[next])?);
            next += 1;
        }
        on_epoch(fs, &reports)?;
    }
    Ok(())
}

/// Result of running several filters side by side up to and past their first update.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstUpdateReport {
    pub first_update_time: Option<f64>,
    /// Largest pairwise [`StateDiscrepancy::scaled`] right after the first update.
    pub first_state_diff: f64,
    /// Largest relative residual `‖P_a⁺ − A(x̂⁻) P_b⁺ A(x̂⁻)ᵀ‖ / ‖P_a⁺‖` over
    /// pairs after the first update, using the first filter's predicted state.
    pub first_covariance_residual: f64,
    /// Pairwise state spread after each later update epoch.
    pub later: Vec<(f64, f64)>,
}

/// Runs `filters` in lockstep over the stream and measures how far their
/// states drift apart after the first and later updates.
pub fn first_update_identity_check(
    filters: &mut [FilterState],
    imu: &[ImuSample],
    obs: &[Observation],
) -> Result<FirstUpdateReport> {
    let mut report = FirstUpdateReport {
        first_update_time: None,
        first_state_diff: 0.0,
        first_covariance_residual: 0.0,
        later: Vec::new(),
    };
    let spread = |fs: &[FilterState]| {
        let mut d: f64 = 0.0;
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                d = d.max(StateDiscrepancy::between(&fs[i].x, &fs[j].x).scaled());
            }
        }
        d
    };
    let t0 = filters.first().map_or(0.0, |f| f.x.time);
    let mut next = 0;
    for k in 0..=imu.len() {
        if k > 0 {
            let u = &imu[k - 1];
            for fs in filters.iter_mut() {
                let dt = u.time - fs.x.time;
                fs.propagate(u, dt)?;
            }
        }
        let half = epoch_window(t0, imu, k);
        let t = filters.first().map_or(t0, |f| f.x.time);
        let mut epoch_obs = Vec::new();
        while next < obs.len() && obs[next].time() <= t + half {
            epoch_obs.push(obs[next]);
            next += 1;
        }
        if epoch_obs.is_empty() {
            continue;
        }
        for fs in filters.iter_mut() {
            fs.set_observation_window(half);
        }
        let predicted = filters.first().map(|f| f.x);
        for fs in filters.iter_mut() {
            for o in &epoch_obs {
                fs.update(o)?;
            }
        }
        let d = spread(filters);
        if report.first_update_time.is_none() {
            report.first_update_time = Some(t);
            report.first_state_diff = d;
            let xm = predicted.expect("at least one filter");
            for a in filters.iter() {
                for b in filters.iter() {
                    let earth = &a.config.earth;
                    let mapped = errorstate::convert_covariance(&b.p, b.param(), a.param(), &xm, earth);
                    let r = (a.p - mapped).norm() / a.p.norm();
                    report.first_covariance_residual = report.first_covariance_residual.max(r);
                }
            }
        } else {
            report.later.push((t, d));
        }
    }
    Ok(report)
}
