//! Error-state parameterizations and the matrices that relate them.
//!
//! Every 15-dimensional error vector uses the block layout
//! `[attitude, velocity, position, gyro bias, accel bias]`. Their meaning per
//! parameterization:
//!
//! * additive EKF: `Ĉ Cᵀ ≈ I + φ×`, `δv = v̂ − v`, `δr = r̂ − r`
//! * left-invariant: `χ̂⁻¹χ ≈ I + ξ^∧`
//! * right-invariant: `χχ̂⁻¹ ≈ I + ξ^∧`
//!
//! Bias errors are shared by all three and read `δb = b − b̂`, the convention
//! under which the bias columns of the system matrices below carry `+Ĉ` (EKF),
//! `−I` (left) and `−Ĉ` (right).

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};
use crate::ins::{self, EarthModel, ImuSample, NavState};
use crate::lie::{self, GroupState, Matrix9, TangentVec9};
use crate::sim::ImuSpec;

pub type ErrorVec15 = SVector<f64, 15>;
pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type NoiseInput = SMatrix<f64, 15, 12>;
pub type Matrix12 = SMatrix<f64, 12, 12>;

/// Block offsets inside [`ErrorVec15`].
pub const ATT: usize = 0;
pub const VEL: usize = 3;
pub const POS: usize = 6;
pub const BG: usize = 9;
pub const BA: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorParameterization {
    AdditiveEkf,
    LeftInvariant,
    RightInvariant,
}

impl ErrorParameterization {
    pub const ALL: [ErrorParameterization; 3] = [Self::AdditiveEkf, Self::LeftInvariant, Self::RightInvariant];

    pub fn name(self) -> &'static str {
        match self {
            Self::AdditiveEkf => "ekf",
            Self::LeftInvariant => "left",
            Self::RightInvariant => "right",
        }
    }
}

impl fmt::Display for ErrorParameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorParameterization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ekf" | "additive" => Ok(Self::AdditiveEkf),
            "left" | "l" | "left-invariant" => Ok(Self::LeftInvariant),
            "right" | "r" | "right-invariant" => Ok(Self::RightInvariant),
            _ => Err(Error::Config(format!("unknown error parameterization '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InjectionMode {
    /// `(I − φ×)Ĉ`, `χ̂(I + ξ^∧)`, `(I + ξ^∧)χ̂`, re-orthonormalized. Under this
    /// mode, errors related by [`relation_matrix`] inject to the same state.
    FirstOrder,
    /// `Exp(−φ)Ĉ`, `χ̂ Exp(ξ)`, `Exp(ξ) χ̂`.
    #[default]
    Retraction,
}

impl FromStr for InjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first-order" => Ok(Self::FirstOrder),
            "retraction" => Ok(Self::Retraction),
            _ => Err(Error::Config(format!("unknown injection mode '{s}'"))),
        }
    }
}

/// Continuous white-noise densities of `w = [w_g, w_a, w_bg, w_ba]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessNoise {
    /// rad²/s
    pub gyro: f64,
    /// m²/s³
    pub accel: f64,
    /// rad²/s³
    pub gyro_bias: f64,
    /// m²/s⁵
    pub accel_bias: f64,
}

impl ProcessNoise {
    pub const ZERO: ProcessNoise = ProcessNoise { gyro: 0.0, accel: 0.0, gyro_bias: 0.0, accel_bias: 0.0 };

    /// Bias random-walk densities are `σ²/τ` with `τ` the bias correlation time.
    pub fn from_spec(spec: &ImuSpec, bias_time: f64) -> Self {
        let (sg, sa) = (spec.gyro_bias_si(), spec.accel_bias_si());
        Self {
            gyro: spec.arw_si().powi(2),
            accel: spec.vrw_si().powi(2),
            gyro_bias: sg * sg / bias_time,
            accel_bias: sa * sa / bias_time,
        }
    }

    pub fn qc(&self) -> Matrix12 {
        let mut q = Matrix12::zeros();
        for (k, v) in [self.gyro, self.accel, self.gyro_bias, self.accel_bias].into_iter().enumerate() {
            for i in 0..3 {
                q[(3 * k + i, 3 * k + i)] = v;
            }
        }
        q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    pub f: Matrix15,
    pub g: NoiseInput,
    pub qc: Matrix12,
}

fn put(m: &mut Matrix15, i: usize, j: usize, b: &Matrix3<f64>) {
    m.fixed_view_mut::<3, 3>(i, j).copy_from(b);
}

fn put_g(m: &mut NoiseInput, i: usize, j: usize, b: &Matrix3<f64>) {
    m.fixed_view_mut::<3, 3>(i, j).copy_from(b);
}

/// Linearized error dynamics `ẋ = F x + G w` of one parameterization.
///
/// `u` must already be bias-corrected. Gravitational acceleration is frozen, so
/// the only position dependence of the EKF velocity error is the centrifugal
/// gradient `−Ω²`.
pub fn system_matrix(
    param: ErrorParameterization,
    x: &NavState,
    u: &ImuSample,
    earth: &EarthModel,
    noise: &ProcessNoise,
) -> Result<SystemMatrices> {
    let i3 = Matrix3::identity();
    let om = earth.omega_skew();
    let c = &x.attitude;
    let mut f = Matrix15::zeros();
    let mut g = NoiseInput::zeros();
    put(&mut f, POS, VEL, &i3);
    put_g(&mut g, BG, 6, &i3);
    put_g(&mut g, BA, 9, &i3);
    match param {
        ErrorParameterization::AdditiveEkf => {
            put(&mut f, ATT, ATT, &(-om));
            put(&mut f, ATT, BG, c);
            put(&mut f, VEL, ATT, &(-lie::skew(&(c * u.accel))));
            put(&mut f, VEL, VEL, &(-2.0 * om));
            put(&mut f, VEL, POS, &(-om * om));
            put(&mut f, VEL, BA, c);
            put_g(&mut g, ATT, 0, c);
            put_g(&mut g, VEL, 3, c);
        }
        ErrorParameterization::LeftInvariant => {
            let w = lie::skew(&u.gyro);
            put(&mut f, ATT, ATT, &(-w));
            put(&mut f, ATT, BG, &(-i3));
            put(&mut f, VEL, ATT, &(-lie::skew(&u.accel)));
            put(&mut f, VEL, VEL, &(-w));
            put(&mut f, VEL, BA, &(-i3));
            put(&mut f, POS, POS, &(-w));
            put_g(&mut g, ATT, 0, &(-i3));
            put_g(&mut g, VEL, 3, &(-i3));
        }
        ErrorParameterization::RightInvariant => {
            let vc = lie::skew(&x.inertial_velocity(earth)) * c;
            let rc = lie::skew(&x.pos) * c;
            let g_ib = ins::gravitational_accel(&x.pos, earth)?;
            put(&mut f, ATT, ATT, &(-om));
            put(&mut f, ATT, BG, &(-c));
            put(&mut f, VEL, ATT, &lie::skew(&g_ib));
            put(&mut f, VEL, VEL, &(-om));
            put(&mut f, VEL, BG, &(-vc));
            put(&mut f, VEL, BA, &(-c));
            put(&mut f, POS, POS, &(-om));
            put(&mut f, POS, BG, &(-rc));
            put_g(&mut g, ATT, 0, &(-c));
            put_g(&mut g, VEL, 0, &(-vc));
            put_g(&mut g, VEL, 3, &(-c));
            put_g(&mut g, POS, 0, &(-rc));
        }
    }
    Ok(SystemMatrices { f, g, qc: noise.qc() })
}

/// Embeds a 9×9 navigation block with identity on the biases.
pub fn embed(m: &Matrix9) -> Matrix15 {
    let mut a = Matrix15::identity();
    a.fixed_view_mut::<9, 9>(0, 0).copy_from(m);
    a
}

fn block9(blocks: [[Matrix3<f64>; 3]; 3]) -> Matrix9 {
    let mut m = Matrix9::zeros();
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            m.fixed_view_mut::<3, 3>(3 * i, 3 * j).copy_from(b);
        }
    }
    m
}

/// EKF error to left-invariant error: `ξ_l = J_l δx`.
pub fn left_jacobian(x: &NavState, earth: &EarthModel) -> Matrix9 {
    let ct = x.attitude.transpose();
    let z = Matrix3::zeros();
    block9([[-ct, z, z], [z, -ct, -ct * earth.omega_skew()], [z, z, -ct]])
}

pub fn left_jacobian_inv(x: &NavState, earth: &EarthModel) -> Matrix9 {
    let c = x.attitude;
    let z = Matrix3::zeros();
    block9([[-c, z, z], [z, -c, earth.omega_skew() * c], [z, z, -c]])
}

/// EKF error to right-invariant error: `ξ_r = J_r δx`.
pub fn right_jacobian(x: &NavState, earth: &EarthModel) -> Matrix9 {
    let i3 = Matrix3::identity();
    let z = Matrix3::zeros();
    let v = lie::skew(&x.inertial_velocity(earth));
    let r = lie::skew(&x.pos);
    block9([[-i3, z, z], [-v, -i3, -earth.omega_skew()], [-r, z, -i3]])
}

pub fn right_jacobian_inv(x: &NavState, earth: &EarthModel) -> Matrix9 {
    let i3 = Matrix3::identity();
    let z = Matrix3::zeros();
    let om = earth.omega_skew();
    let v = lie::skew(&x.inertial_velocity(earth));
    let r = lie::skew(&x.pos);
    block9([[-i3, z, z], [v - om * r, -i3, om], [r, z, -i3]])
}

fn from_ekf(to: ErrorParameterization, x: &NavState, earth: &EarthModel) -> Matrix9 {
    match to {
        ErrorParameterization::AdditiveEkf => Matrix9::identity(),
        ErrorParameterization::LeftInvariant => left_jacobian(x, earth),
        ErrorParameterization::RightInvariant => right_jacobian(x, earth),
    }
}

fn to_ekf(from: ErrorParameterization, x: &NavState, earth: &EarthModel) -> Matrix9 {
    match from {
        ErrorParameterization::AdditiveEkf => Matrix9::identity(),
        ErrorParameterization::LeftInvariant => left_jacobian_inv(x, earth),
        ErrorParameterization::RightInvariant => right_jacobian_inv(x, earth),
    }
}

/// The 9×9 navigation block of [`relation_matrix`].
pub fn relation_nav(
    from: ErrorParameterization,
    to: ErrorParameterization,
    x: &NavState,
    earth: &EarthModel,
) -> Matrix9 {
    use ErrorParameterization::*;
    match (from, to) {
        _ if from == to => Matrix9::identity(),
        (LeftInvariant, RightInvariant) => x.to_group(earth).adjoint(),
        (RightInvariant, LeftInvariant) => x.to_group(earth).inverse().adjoint(),
        (AdditiveEkf, _) => from_ekf(to, x, earth),
        (_, AdditiveEkf) => to_ekf(from, x, earth),
        _ => unreachable!(),
    }
}

/// `A` such that `ξ_to = A ξ_from` for errors about the same estimate `x`.
pub fn relation_matrix(
    from: ErrorParameterization,
    to: ErrorParameterization,
    x: &NavState,
    earth: &EarthModel,
) -> Matrix15 {
    embed(&relation_nav(from, to, x, earth))
}

/// `A(x₁) − A(x₀)` for the EKF → `to` relation, formed from state
/// differences so that Earth-radius terms never cancel.
pub fn relation_increment(
    to: ErrorParameterization,
    x1: &NavState,
    x0: &NavState,
    earth: &EarthModel,
) -> Matrix15 {
    let z = Matrix3::zeros();
    let nav = match to {
        ErrorParameterization::AdditiveEkf => Matrix9::zeros(),
        ErrorParameterization::LeftInvariant => left_jacobian(x1, earth) - left_jacobian(x0, earth),
        ErrorParameterization::RightInvariant => {
            let dv = lie::skew(&(x1.inertial_velocity(earth) - x0.inertial_velocity(earth)));
            let dr = lie::skew(&(x1.pos - x0.pos));
            block9([[z, z, z], [-dv, z, z], [-dr, z, z]])
        }
    };
    let mut m = Matrix15::zeros();
    m.fixed_view_mut::<9, 9>(0, 0).copy_from(&nav);
    m
}

/// `A P Aᵀ`: the same uncertainty expressed in another parameterization.
pub fn convert_covariance(
    p: &Matrix15,
    from: ErrorParameterization,
    to: ErrorParameterization,
    x: &NavState,
    earth: &EarthModel,
) -> Matrix15 {
    if from == to {
        return *p;
    }
    let a = relation_matrix(from, to, x, earth);
    a * p * a.transpose()
}

static FLIP_EKF_TO_RIGHT: AtomicBool = AtomicBool::new(false);

/// Deliberate defect for exercising the self-checks: flips the sign of the
/// off-diagonal blocks of the closed-form EKF → right-invariant transformation.
#[doc(hidden)]
pub fn set_sign_fault(on: bool) {
    FLIP_EKF_TO_RIGHT.store(on, Ordering::Relaxed);
}

/// Closed-form `T = A⁻¹(x̂⁺) A(x̂⁻)` with `A` the `original → target` relation.
/// Applied to the updated covariance of a filter that runs in `original`.
pub fn transformation_matrix(
    original: ErrorParameterization,
    target: ErrorParameterization,
    x_plus: &NavState,
    x_minus: &NavState,
    earth: &EarthModel,
) -> Matrix15 {
    use ErrorParameterization::*;
    let i3 = Matrix3::identity();
    let z = Matrix3::zeros();
    let om = earth.omega_skew();
    let (cp, cm) = (x_plus.attitude, x_minus.attitude);
    // differences first: the raw skew matrices carry Earth-radius magnitudes
    let dv = lie::skew(&(x_plus.inertial_velocity(earth) - x_minus.inertial_velocity(earth)));
    let dr = lie::skew(&(x_plus.pos - x_minus.pos));
    let vm = lie::skew(&x_minus.inertial_velocity(earth));
    let rm = lie::skew(&x_minus.pos);
    let nav = match (original, target) {
        _ if original == target => Matrix9::identity(),
        (AdditiveEkf, LeftInvariant) => {
            let d = cp * cm.transpose();
            block9([[d, z, z], [z, d, d * om - om * d], [z, z, d]])
        }
        (LeftInvariant, AdditiveEkf) => {
            let d = cp.transpose() * cm;
            block9([[d, z, z], [z, d, z], [z, z, d]])
        }
        (AdditiveEkf, RightInvariant) => {
            let s = if FLIP_EKF_TO_RIGHT.load(Ordering::Relaxed) { -1.0 } else { 1.0 };
            block9([[i3, z, z], [(-dv + om * dr) * s, i3, z], [-dr * s, z, i3]])
        }
        (RightInvariant, AdditiveEkf) => block9([[i3, z, z], [dv, i3, z], [dr, z, i3]]),
        (LeftInvariant, RightInvariant) => {
            let d = cp.transpose() * cm;
            let ct = cp.transpose();
            block9([[d, z, z], [-ct * dv * cm, d, z], [-ct * dr * cm, z, d]])
        }
        (RightInvariant, LeftInvariant) => {
            let d = cp * cm.transpose();
            // v̂⁺× D − D v̂⁻× with v̂⁺× split as (v̂⁺ − v̂⁻)× + v̂⁻×
            block9([[d, z, z], [dv * d + vm * d - d * vm, d, z], [dr * d + rm * d - d * rm, z, d]])
        }
        _ => unreachable!(),
    };
    embed(&nav)
}

/// `A⁻¹(x̂⁺) A(x̂⁻)` evaluated by numerically inverting the relation matrix.
/// Reference for [`transformation_matrix`].
pub fn transformation_matrix_generic(
    original: ErrorParameterization,
    target: ErrorParameterization,
    x_plus: &NavState,
    x_minus: &NavState,
    earth: &EarthModel,
) -> Result<Matrix15> {
    let a_plus = relation_matrix(original, target, x_plus, earth);
    let inv = a_plus
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::InvalidGroupElement("singular relation matrix".into()))?;
    Ok(inv * relation_matrix(original, target, x_minus, earth))
}

/// Corrects `x` with an estimated error `xi` (an estimate of the error of `x`).
pub fn inject_error(
    param: ErrorParameterization,
    x: &NavState,
    xi: &ErrorVec15,
    mode: InjectionMode,
    earth: &EarthModel,
) -> Result<NavState> {
    let phi: Vector3<f64> = xi.fixed_rows::<3>(ATT).into_owned();
    let angle = phi.norm();
    if !(angle < std::f64::consts::PI) {
        return Err(Error::AttitudeErrorTooLarge(angle));
    }
    let d_vel: Vector3<f64> = xi.fixed_rows::<3>(VEL).into_owned();
    let d_pos: Vector3<f64> = xi.fixed_rows::<3>(POS).into_owned();
    let mut out = *x;
    out.bg += xi.fixed_rows::<3>(BG);
    out.ba += xi.fixed_rows::<3>(BA);
    let i3 = Matrix3::identity();
    match param {
        ErrorParameterization::AdditiveEkf => {
            out.attitude = match mode {
                InjectionMode::FirstOrder => lie::orthonormalize(&((i3 - lie::skew(&phi)) * x.attitude)),
                InjectionMode::Retraction => lie::so3_exp(&(-phi)) * x.attitude,
            };
            out.vel = x.vel - d_vel;
            out.pos = x.pos - d_pos;
        }
        ErrorParameterization::LeftInvariant | ErrorParameterization::RightInvariant => {
            let chi = x.to_group(earth);
            let nav: TangentVec9 = xi.fixed_rows::<9>(0).into_owned();
            let left = param == ErrorParameterization::LeftInvariant;
            let corrected = match mode {
                InjectionMode::Retraction => {
                    let e = lie::se23_exp(&nav);
                    if left {
                        chi.compose(&e)
                    } else {
                        e.compose(&chi)
                    }
                }
                InjectionMode::FirstOrder => {
                    let k = lie::skew(&phi);
                    let g = if left {
                        GroupState::new(
                            chi.rotation * (i3 + k),
                            chi.nu + chi.rotation * d_vel,
                            chi.rho + chi.rotation * d_pos,
                        )
                    } else {
                        GroupState::new(
                            (i3 + k) * chi.rotation,
                            chi.nu + k * chi.nu + d_vel,
                            chi.rho + k * chi.rho + d_pos,
                        )
                    };
                    GroupState { rotation: lie::orthonormalize(&g.rotation), ..g }
                }
            };
            out = out.with_group(&corrected, earth);
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("injected state"));
    }
    Ok(out)
}
