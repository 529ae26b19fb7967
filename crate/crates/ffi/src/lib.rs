//! C interface to the `cteskf` filters.
//!
//! A filter lives behind an opaque [`CteskfFilter`] handle. Every fallible
//! call returns a [`CteskfStatus`]; on anything but `CTESKF_STATUS_OK` the
//! reason is available from [`cteskf_last_error_message`] on the same thread.
//! Panics never cross the boundary.
//!
//! Matrices are row-major: attitudes are 9 doubles, covariances 225.
//!
//! # Safety
//!
//! Pointers must be null or valid for the documented number of elements.
//! A handle must come from [`cteskf_filter_create`], must not be used after
//! [`cteskf_filter_destroy`], and must not be used from two threads at once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cteskf::errorstate::{ErrorParameterization, InjectionMode, Matrix15, ProcessNoise};
use cteskf::filter::{CovPropagation, FilterConfig, FilterState, Strategy, Targets};
use cteskf::ins::{EarthModel, ImuSample, NavState};
use cteskf::nalgebra::{Matrix3, Vector3};
use cteskf::sensors::{GnssVelObs, Observation, OdoObs};
use cteskf::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CteskfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidTimeStep = 3,
    TimestampMismatch = 4,
    SingularInnovation = 5,
    /// Non-finite values, a state off the Earth surface band or an
    /// attitude correction of π or more. The filter should be discarded.
    NumericalFailure = 6,
    /// A bug inside the library; the handle must not be used again.
    Panic = 7,
}

/// Error parameterization codes used in [`CteskfConfig`].
#[repr(u32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CteskfParameterization {
    Ekf = 0,
    LeftInvariant = 1,
    RightInvariant = 2,
}

/// Update strategy codes used in [`CteskfConfig`].
#[repr(u32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CteskfStrategy {
    /// Update in the filter's own parameterization.
    Plain = 0,
    /// Map the covariance to the target, update, map back.
    Switch = 1,
    /// Update in the own parameterization, then transform the covariance.
    Transform = 2,
}

/// Injection codes used in [`CteskfConfig`].
#[repr(u32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CteskfInjection {
    FirstOrder = 0,
    Retraction = 1,
}

/// Covariance propagation codes used in [`CteskfConfig`].
#[repr(u32)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CteskfPropagation {
    Euler = 0,
    Transported = 1,
}

/// Filter settings. Enumerated fields take the codes of the `Cteskf*` enums;
/// start from [`cteskf_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CteskfConfig {
    pub parameterization: u32,
    pub strategy: u32,
    /// Target of GNSS velocity updates under switch or transform.
    pub gnss_target: u32,
    /// Target of odometer updates under switch or transform.
    pub odo_target: u32,
    pub injection: u32,
    pub propagation: u32,
    /// Joseph-form covariance update.
    pub joseph: bool,
    /// Continuous noise densities: rad²/s, m²/s³, rad²/s³, m²/s⁵.
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias_noise: f64,
    pub accel_bias_noise: f64,
}

/// Navigation state in the Earth-fixed frame.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CteskfNavState {
    /// s
    pub time: f64,
    /// Body-to-Earth rotation, row-major.
    pub attitude: [f64; 9],
    /// m/s
    pub vel: [f64; 3],
    /// m
    pub pos: [f64; 3],
    /// rad/s
    pub gyro_bias: [f64; 3],
    /// m/s²
    pub accel_bias: [f64; 3],
}

/// Opaque filter handle.
pub struct CteskfFilter {
    inner: FilterState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CteskfStatus {
    match e {
        Error::InvalidTimeStep(..) => CteskfStatus::InvalidTimeStep,
        Error::TimestampMismatch { .. } => CteskfStatus::TimestampMismatch,
        Error::SingularInnovation(_) => CteskfStatus::SingularInnovation,
        Error::Config(_) | Error::InvalidGroupElement(_) | Error::Parse { .. } | Error::Io { .. } => {
            CteskfStatus::InvalidArgument
        }
        Error::NonFinite(_) | Error::OffSurface(_) | Error::ZeroPosition | Error::AttitudeErrorTooLarge(_) => {
            CteskfStatus::NumericalFailure
        }
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Filter(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Filter(e)
    }
}

/// Runs `f`, records any failure for [`cteskf_last_error_message`] and maps it to a status.
fn guarded(f: impl FnOnce() -> Result<(), Failure>) -> CteskfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CteskfStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("{what} is null"));
            CteskfStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(&msg);
            CteskfStatus::InvalidArgument
        }
        Ok(Err(Failure::Filter(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal error: {msg}"));
            CteskfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn vec3(p: *const f64, what: &'static str) -> Result<Vector3<f64>, Failure> {
    let s = deref(p.cast::<[f64; 3]>(), what)?;
    Ok(Vector3::from(*s))
}

fn param_of(code: u32, field: &str) -> Result<ErrorParameterization, Failure> {
    match code {
        0 => Ok(ErrorParameterization::AdditiveEkf),
        1 => Ok(ErrorParameterization::LeftInvariant),
        2 => Ok(ErrorParameterization::RightInvariant),
        _ => Err(Failure::Invalid(format!("{field}: unknown parameterization code {code}"))),
    }
}

fn filter_config(c: &CteskfConfig) -> Result<FilterConfig, Failure> {
    let param = param_of(c.parameterization, "parameterization")?;
    let targets = Targets { gnss: param_of(c.gnss_target, "gnss_target")?, odo: param_of(c.odo_target, "odo_target")? };
    let strategy = match c.strategy {
        0 => Strategy::Plain,
        1 => Strategy::Switch(targets),
        2 => Strategy::Transform(targets),
        s => return Err(Failure::Invalid(format!("strategy: unknown code {s}"))),
    };
    let injection = match c.injection {
        0 => InjectionMode::FirstOrder,
        1 => InjectionMode::Retraction,
        s => return Err(Failure::Invalid(format!("injection: unknown code {s}"))),
    };
    let propagation = match c.propagation {
        0 => CovPropagation::Euler,
        1 => CovPropagation::Transported,
        s => return Err(Failure::Invalid(format!("propagation: unknown code {s}"))),
    };
    let densities = [c.gyro_noise, c.accel_noise, c.gyro_bias_noise, c.accel_bias_noise];
    if densities.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Failure::Invalid("noise densities must be finite and non-negative".into()));
    }
    let noise = ProcessNoise {
        gyro: c.gyro_noise,
        accel: c.accel_noise,
        gyro_bias: c.gyro_bias_noise,
        accel_bias: c.accel_bias_noise,
    };
    Ok(FilterConfig::new(param, noise, EarthModel::default())
        .with_strategy(strategy)
        .with_injection(injection)
        .with_propagation(propagation)
        .with_joseph(c.joseph))
}

fn nav_state(s: &CteskfNavState) -> Result<NavState, Failure> {
    let c = Matrix3::from_row_slice(&s.attitude);
    let off = (c.transpose() * c - Matrix3::identity()).norm();
    if !(off < 1e-6 && c.determinant() > 0.0) {
        return Err(Failure::Invalid(format!("attitude is not a rotation (|C^T C - I| = {off:e})")));
    }
    let mut x = NavState::new(c, Vector3::from(s.vel), Vector3::from(s.pos), s.time);
    x.bg = Vector3::from(s.gyro_bias);
    x.ba = Vector3::from(s.accel_bias);
    if !s.time.is_finite() {
        return Err(Failure::Invalid("time is not finite".into()));
    }
    x.validate(&EarthModel::default())?;
    Ok(x)
}

fn write_state(x: &NavState, out: &mut CteskfNavState) {
    let c = &x.attitude;
    *out = CteskfNavState {
        time: x.time,
        attitude: std::array::from_fn(|k| c[(k / 3, k % 3)]),
        vel: x.vel.into(),
        pos: x.pos.into(),
        gyro_bias: x.bg.into(),
        accel_bias: x.ba.into(),
    };
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cteskf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string has an interior NUL"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or an empty string after a
/// successful one. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cteskf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fills `out` with an EKF, plain updates, retraction injection and
/// transported propagation; switch and transform targets are left-invariant
/// for GNSS and right-invariant for the odometer. Noise densities are zero.
///
/// # Safety
///
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn cteskf_config_default(out: *mut CteskfConfig) -> CteskfStatus {
    guarded(|| {
        let out = deref_mut(out, "out")?;
        *out = CteskfConfig {
            parameterization: CteskfParameterization::Ekf as u32,
            strategy: CteskfStrategy::Plain as u32,
            gnss_target: CteskfParameterization::LeftInvariant as u32,
            odo_target: CteskfParameterization::RightInvariant as u32,
            injection: CteskfInjection::Retraction as u32,
            propagation: CteskfPropagation::Transported as u32,
            joseph: false,
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_noise: 0.0,
            accel_bias_noise: 0.0,
        };
        Ok(())
    })
}

/// Creates a filter at `initial` with covariance `covariance_ekf` (225
/// doubles, row-major, in the EKF parameterization; converted to the
/// configured one). On success `*out` holds a new handle.
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_create(
    config: *const CteskfConfig,
    initial: *const CteskfNavState,
    covariance_ekf: *const f64,
    out: *mut *mut CteskfFilter,
) -> CteskfStatus {
    guarded(|| {
        let out = deref_mut(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = filter_config(deref(config, "config")?)?;
        let x = nav_state(deref(initial, "initial")?)?;
        let p = Matrix15::from_row_slice(deref(covariance_ekf.cast::<[f64; 225]>(), "covariance_ekf")?);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Failure::Invalid("covariance has non-finite entries".into()));
        }
        if (p - p.transpose()).norm() > 1e-9 * p.norm() {
            return Err(Failure::Invalid("covariance is not symmetric".into()));
        }
        let inner = FilterState::from_ekf_covariance(x, &p, cfg);
        *out = Box::into_raw(Box::new(CteskfFilter { inner }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
///
/// `filter` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_destroy(filter: *mut CteskfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Propagates to `time` with the IMU sample ending there: gyro rate (rad/s)
/// and specific force (m/s²), each 3 doubles in the body frame.
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_propagate(
    filter: *mut CteskfFilter,
    time: f64,
    gyro: *const f64,
    accel: *const f64,
) -> CteskfStatus {
    guarded(|| {
        let f = &mut deref_mut(filter, "filter")?.inner;
        let u = ImuSample::new(time, vec3(gyro, "gyro")?, vec3(accel, "accel")?);
        let dt = time - f.x.time;
        f.propagate(&u, dt)?;
        Ok(())
    })
}

unsafe fn update(filter: *mut CteskfFilter, obs: Observation) -> Result<(), Failure> {
    let f = &mut deref_mut(filter, "filter")?.inner;
    let sigma = obs.sigma();
    if !sigma.iter().all(|s| s.is_finite() && *s >= 0.0) {
        return Err(Failure::Invalid("sigma must be finite and non-negative".into()));
    }
    f.update(&obs)?;
    Ok(())
}

/// GNSS velocity update: Earth-fixed velocity (m/s) and per-axis standard
/// deviations, 3 doubles each. `time` must match the filter time to within
/// half of the last propagation step.
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_update_gnss(
    filter: *mut CteskfFilter,
    time: f64,
    vel: *const f64,
    sigma: *const f64,
) -> CteskfStatus {
    guarded(|| update(filter, Observation::GnssVel(GnssVelObs { time, vel: vec3(vel, "vel")?, sigma: vec3(sigma, "sigma")? })))
}

/// Odometer update: body-frame velocity (forward speed, then zero lateral and
/// vertical pseudo-measurements) and per-axis standard deviations.
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_update_odo(
    filter: *mut CteskfFilter,
    time: f64,
    vel_body: *const f64,
    sigma: *const f64,
) -> CteskfStatus {
    guarded(|| {
        update(filter, Observation::Odo(OdoObs { time, vel_body: vec3(vel_body, "vel_body")?, sigma: vec3(sigma, "sigma")? }))
    })
}

/// Copies the current estimate into `out`.
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_state(filter: *const CteskfFilter, out: *mut CteskfNavState) -> CteskfStatus {
    guarded(|| {
        let f = &deref(filter, "filter")?.inner;
        write_state(&f.x, deref_mut(out, "out")?);
        Ok(())
    })
}

/// Copies the covariance, expressed in `parameterization` (a
/// [`CteskfParameterization`] code) at the current estimate, into `out`
/// (225 doubles, row-major).
///
/// # Safety
///
/// See the crate documentation.
#[no_mangle]
pub unsafe extern "C" fn cteskf_filter_covariance(
    filter: *const CteskfFilter,
    parameterization: u32,
    out: *mut f64,
) -> CteskfStatus {
    guarded(|| {
        let f = &deref(filter, "filter")?.inner;
        let param = param_of(parameterization, "parameterization")?;
        let out = deref_mut(out.cast::<[f64; 225]>(), "out")?;
        let p = f.covariance_in(param);
        for (k, v) in out.iter_mut().enumerate() {
            *v = p[(k / 15, k % 15)];
        }
        Ok(())
    })
}
