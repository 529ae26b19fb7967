//! ECEF strapdown mechanization.
//!
//! Navigation states hold `C_b^e`, Earth-referenced velocity `v_eb^e`, position
//! `r_eb^e` and the two sensor biases. The inertial-referenced velocity
//! `v̄ = v + ω_ie × r` is what the SE₂(3) embedding uses.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::lie::{self, GroupState, Matrix5, Rotation};

/// WGS-84 Earth rotation rate (rad/s).
pub const OMEGA_IE: f64 = 7.292115e-5;
/// WGS-84 gravitational constant (m³/s²).
pub const GM: f64 = 3.986004418e14;
/// WGS-84 semi-major axis (m).
pub const EQUATORIAL_RADIUS: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const FLATTENING: f64 = 1.0 / 298.257223563;
pub const J2: f64 = 1.082_629_821_368_57e-3;

const SURFACE_BAND: (f64, f64) = (6.2e6, 1.2e7);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GravityModel {
    /// Fixed gravity vector `g^e`, independent of position.
    Constant(Vector3<f64>),
    /// Point-mass gravitation `-GM r/|r|³`.
    Spherical,
    /// Point mass plus the J2 zonal term.
    J2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarthModel {
    pub omega_ie: Vector3<f64>,
    pub gravity: GravityModel,
    /// Reject positions far from the Earth surface.
    pub surface_guard: bool,
    /// Largest accepted propagation step (s).
    pub max_dt: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            omega_ie: Vector3::new(0.0, 0.0, OMEGA_IE),
            gravity: GravityModel::Spherical,
            surface_guard: true,
            max_dt: 0.5,
        }
    }
}

impl EarthModel {
    /// Earth rate with a constant gravity vector and no surface guard. Handy for
    /// algebraic tests on arbitrary states.
    pub fn constant_gravity(g: Vector3<f64>) -> Self {
        Self { gravity: GravityModel::Constant(g), surface_guard: false, ..Self::default() }
    }

    /// `(ω_ie ×)`
    pub fn omega_skew(&self) -> Matrix3<f64> {
        lie::skew(&self.omega_ie)
    }

    /// Gravity `g^e`: gravitation minus the centrifugal term.
    pub fn gravity(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        match self.gravity {
            GravityModel::Constant(g) => Ok(g),
            _ => {
                let om = self.omega_skew();
                Ok(self.gravitation(r)? - om * om * r)
            }
        }
    }

    fn gravitation(&self, r: &Vector3<f64>) -> Result<Vector3<f64>> {
        let n2 = r.norm_squared();
        if n2 == 0.0 {
            return Err(Error::ZeroPosition);
        }
        let n = n2.sqrt();
        let point = -GM / (n2 * n) * r;
        match self.gravity {
            GravityModel::J2 => {
                let k = 1.5 * J2 * (EQUATORIAL_RADIUS * EQUATORIAL_RADIUS) / n2;
                let z2 = r.z * r.z / n2;
                Ok(Vector3::new(
                    point.x * (1.0 + k * (1.0 - 5.0 * z2)),
                    point.y * (1.0 + k * (1.0 - 5.0 * z2)),
                    point.z * (1.0 + k * (3.0 - 5.0 * z2)),
                ))
            }
            _ => Ok(point),
        }
    }
}

/// `G_ib^e = g^e + (ω_ie×)² r`.
pub fn gravitational_accel(r: &Vector3<f64>, earth: &EarthModel) -> Result<Vector3<f64>> {
    let om = earth.omega_skew();
    Ok(earth.gravity(r)? + om * om * r)
}

/// `v̄ = v + ω_ie × r`
pub fn inertial_velocity(vel: &Vector3<f64>, pos: &Vector3<f64>, earth: &EarthModel) -> Vector3<f64> {
    vel + earth.omega_ie.cross(pos)
}

/// Inverse of [`inertial_velocity`].
pub fn earth_velocity(nu: &Vector3<f64>, pos: &Vector3<f64>, earth: &EarthModel) -> Vector3<f64> {
    nu - earth.omega_ie.cross(pos)
}

/// Geodetic latitude/longitude/height (rad, rad, m) to ECEF.
pub fn geodetic_to_ecef(lat: f64, lon: f64, height: f64) -> Vector3<f64> {
    let e2 = FLATTENING * (2.0 - FLATTENING);
    let (sl, cl) = lat.sin_cos();
    let n = EQUATORIAL_RADIUS / (1.0 - e2 * sl * sl).sqrt();
    Vector3::new(
        (n + height) * cl * lon.cos(),
        (n + height) * cl * lon.sin(),
        (n * (1.0 - e2) + height) * sl,
    )
}

/// ECEF to geodetic latitude/longitude/height (rad, rad, m), by fixed-point
/// iteration on the latitude.
pub fn ecef_to_geodetic(r: &Vector3<f64>) -> (f64, f64, f64) {
    let e2 = FLATTENING * (2.0 - FLATTENING);
    let p = r.x.hypot(r.y);
    let lon = r.y.atan2(r.x);
    let mut lat = r.z.atan2(p * (1.0 - e2));
    let mut h = 0.0;
    for _ in 0..8 {
        let sl = lat.sin();
        let n = EQUATORIAL_RADIUS / (1.0 - e2 * sl * sl).sqrt();
        h = if lat.cos().abs() > 1e-9 { p / lat.cos() - n } else { r.z.abs() - n * (1.0 - e2) };
        lat = r.z.atan2(p * (1.0 - e2 * n / (n + h)));
    }
    (lat, lon, h)
}

/// Rotation from the local north-east-down frame to ECEF.
pub fn ned_to_ecef(lat: f64, lon: f64) -> Rotation {
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    Matrix3::new(
        -sl * co, -so, -cl * co,
        -sl * so, co, -cl * so,
        cl, 0.0, -sl,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavState {
    /// `C_b^e`
    pub attitude: Rotation,
    /// `v_eb^e` (m/s)
    pub vel: Vector3<f64>,
    /// `r_eb^e` (m)
    pub pos: Vector3<f64>,
    /// Gyro bias (rad/s).
    pub bg: Vector3<f64>,
    /// Accelerometer bias (m/s²).
    pub ba: Vector3<f64>,
    pub time: f64,
}

impl NavState {
    pub fn new(attitude: Rotation, vel: Vector3<f64>, pos: Vector3<f64>, time: f64) -> Self {
        Self { attitude, vel, pos, bg: Vector3::zeros(), ba: Vector3::zeros(), time }
    }

    pub fn inertial_velocity(&self, earth: &EarthModel) -> Vector3<f64> {
        inertial_velocity(&self.vel, &self.pos, earth)
    }

    /// SE₂(3) view `(C, v̄, r)`.
    pub fn to_group(&self, earth: &EarthModel) -> GroupState {
        GroupState::new(self.attitude, self.inertial_velocity(earth), self.pos)
    }

    /// Replaces the navigation part with `chi`, keeping biases and time.
    pub fn with_group(&self, chi: &GroupState, earth: &EarthModel) -> NavState {
        NavState {
            attitude: chi.rotation,
            vel: earth_velocity(&chi.nu, &chi.rho, earth),
            pos: chi.rho,
            ..*self
        }
    }

    pub fn is_finite(&self) -> bool {
        self.attitude.iter().all(|v| v.is_finite())
            && self.vel.iter().chain(self.pos.iter()).all(|v| v.is_finite())
            && self.bg.iter().chain(self.ba.iter()).all(|v| v.is_finite())
    }

    pub fn validate(&self, earth: &EarthModel) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("navigation state"));
        }
        if earth.surface_guard {
            let n = self.pos.norm();
            if !(SURFACE_BAND.0..=SURFACE_BAND.1).contains(&n) {
                return Err(Error::OffSurface(n));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    /// End of the sampling interval (s).
    pub time: f64,
    /// `ω̃_ib^b` (rad/s)
    pub gyro: Vector3<f64>,
    /// `f̃_ib^b` (m/s²)
    pub accel: Vector3<f64>,
}

impl ImuSample {
    pub fn new(time: f64, gyro: Vector3<f64>, accel: Vector3<f64>) -> Self {
        Self { time, gyro, accel }
    }

    /// Measurement with the estimated biases removed.
    pub fn corrected(&self, x: &NavState) -> ImuSample {
        ImuSample { time: self.time, gyro: self.gyro - x.bg, accel: self.accel - x.ba }
    }
}

/// Time derivative of the navigation part of a [`NavState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NavDerivative {
    /// `Ċ_b^e`
    pub attitude: Matrix3<f64>,
    /// Rotation rate as an e-frame tangent, `Ċ Cᵀ = (rate ×)`.
    pub attitude_rate: Vector3<f64>,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
}

/// Classical ECEF kinematics `Ċ = C(ω×) − (ω_ie×)C`, `v̇ = Cf − 2ω_ie×v + g`, `ṙ = v`.
pub fn classic_derivative(
    x: &NavState,
    u: &ImuSample,
    earth: &EarthModel,
    subtract_bias: bool,
) -> Result<NavDerivative> {
    let u = if subtract_bias { u.corrected(x) } else { *u };
    let om = earth.omega_skew();
    let c = &x.attitude;
    Ok(NavDerivative {
        attitude: c * lie::skew(&u.gyro) - om * c,
        attitude_rate: c * u.gyro - earth.omega_ie,
        vel: c * u.accel - 2.0 * om * x.vel + earth.gravity(&x.pos)?,
        pos: x.vel,
    })
}

/// The pair `(W, U)` with `χ̇ = χW + Uχ` for a frozen gravitational acceleration.
pub fn group_affine_matrices(u: &ImuSample, earth: &EarthModel, g_ib: &Vector3<f64>) -> (Matrix5, Matrix5) {
    let mut w = Matrix5::zeros();
    w.fixed_view_mut::<3, 3>(0, 0).copy_from(&lie::skew(&u.gyro));
    w.fixed_view_mut::<3, 1>(0, 3).copy_from(&u.accel);
    w[(3, 4)] = 1.0;
    let mut uu = Matrix5::zeros();
    uu.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-earth.omega_skew()));
    uu.fixed_view_mut::<3, 1>(0, 3).copy_from(g_ib);
    uu[(3, 4)] = -1.0;
    (w, uu)
}

/// Group-affine kinematics on SE₂(3), blockwise:
/// `Ċ = C(ω×) − ΩC`, `ν̇ = Cf − Ων + G_ib`, `ρ̇ = ν − Ωρ`.
pub fn group_affine_derivative(
    chi: &GroupState,
    u: &ImuSample,
    earth: &EarthModel,
    g_ib: &Vector3<f64>,
) -> Matrix5 {
    let om = earth.omega_skew();
    let c = &chi.rotation;
    let mut d = Matrix5::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(&(c * lie::skew(&u.gyro) - om * c));
    d.fixed_view_mut::<3, 1>(0, 3).copy_from(&(c * u.accel - om * chi.nu + g_ib));
    d.fixed_view_mut::<3, 1>(0, 4).copy_from(&(chi.nu - om * chi.rho));
    d
}

/// Classical kinematics written on the same 5×5 embedding, reading the middle
/// column as the Earth-referenced velocity. Its double Coriolis term makes it
/// fail the group-affine property; kept as a negative control.
pub fn classic_derivative_matrix(
    chi: &GroupState,
    u: &ImuSample,
    earth: &EarthModel,
    g: &Vector3<f64>,
) -> Matrix5 {
    let om = earth.omega_skew();
    let c = &chi.rotation;
    let mut d = Matrix5::zeros();
    d.fixed_view_mut::<3, 3>(0, 0).copy_from(&(c * lie::skew(&u.gyro) - om * c));
    d.fixed_view_mut::<3, 1>(0, 3).copy_from(&(c * u.accel - 2.0 * om * chi.nu + g));
    d.fixed_view_mut::<3, 1>(0, 4).copy_from(&chi.nu);
    d
}

/// Advances `x` over one IMU interval. The sample is bias-corrected with the
/// state's own biases and treated as constant over the interval.
///
/// Attitude uses the exact solution for constant rates,
/// `C₁ = Exp(−ω_ie dt) C₀ Exp(ω dt)`; velocity and position use the midpoint rule.
pub fn propagate_state(x: &NavState, u: &ImuSample, dt: f64, earth: &EarthModel) -> Result<NavState> {
    if !(dt > 0.0 && dt <= earth.max_dt) {
        return Err(Error::InvalidTimeStep(dt, earth.max_dt));
    }
    let u = u.corrected(x);
    let om = earth.omega_skew();
    let c_at = |tau: f64| {
        lie::so3_exp(&(-earth.omega_ie * tau)) * x.attitude * lie::so3_exp(&(u.gyro * tau))
    };
    let accel = |c: &Rotation, v: &Vector3<f64>, r: &Vector3<f64>| -> Result<Vector3<f64>> {
        Ok(c * u.accel - 2.0 * om * v + earth.gravity(r)?)
    };
    let a0 = accel(&x.attitude, &x.vel, &x.pos)?;
    let v_mid = x.vel + a0 * (0.5 * dt);
    let r_mid = x.pos + x.vel * (0.5 * dt);
    let a_mid = accel(&c_at(0.5 * dt), &v_mid, &r_mid)?;
    let next = NavState {
        attitude: lie::orthonormalize(&c_at(dt)),
        vel: x.vel + a_mid * dt,
        pos: x.pos + v_mid * dt,
        time: x.time + dt,
        ..*x
    };
    if !next.is_finite() {
        return Err(Error::NonFinite("propagated state"));
    }
    Ok(next)
}
