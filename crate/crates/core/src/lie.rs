//! SO(3) and SE₂(3) group operations.
//!
//! Rotations are plain `Matrix3<f64>` values that are kept orthonormal by the
//! callers. A [`GroupState`] packs an attitude with two translational columns
//! (inertial-frame velocity and position) and is realized as a 5×5 matrix
//!
//! ```text
//! [ R  ν  ρ ]
//! [ 0  1  0 ]
//! [ 0  0  1 ]
//! ```

use std::ops::Mul;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

/// 3×3 orthonormal matrix with unit determinant.
pub type Rotation = Matrix3<f64>;
pub type Matrix5 = SMatrix<f64, 5, 5>;
pub type Matrix9 = SMatrix<f64, 9, 9>;
/// Tangent vector `[φ, dν, dρ]` of SE₂(3).
pub type TangentVec9 = SVector<f64, 9>;

/// Below this rotation angle the trigonometric coefficients switch to Taylor series.
pub const SMALL_ANGLE: f64 = 1e-7;

// (θ - sin θ)/θ³ cancels badly well above SMALL_ANGLE, so it has its own cutoff.
const SERIES_ANGLE: f64 = 1e-2;

// cos θ below this value sends the logarithm through the symmetric-part branch.
const NEAR_PI_COS: f64 = -0.99;

/// Tolerance used by [`se23_vee`] and [`GroupState::from_matrix`] for the constant rows.
pub const BOTTOM_ROW_TOL: f64 = 1e-12;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]; reads the antisymmetric part of `m`.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

// sin θ / θ
fn sinc(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

// (1 - cos θ) / θ², written with the half angle so it never cancels.
fn cosc(theta: f64) -> f64 {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        0.5 - t2 / 24.0 + t2 * t2 / 720.0
    } else {
        let s = (0.5 * theta).sin();
        2.0 * s * s / (theta * theta)
    }
}

// (θ - sin θ) / θ³
fn sinc3(theta: f64) -> f64 {
    if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362_880.0
    } else {
        (theta - theta.sin()) / (theta * theta * theta)
    }
}

/// Rodrigues formula.
pub fn so3_exp(phi: &Vector3<f64>) -> Rotation {
    let theta = phi.norm();
    let k = skew(phi);
    Matrix3::identity() + k * sinc(theta) + k * k * cosc(theta)
}

/// Which branch [`so3_log_with_branch`] took.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogBranch {
    SmallAngle,
    Regular,
    /// Axis taken from the symmetric part `(R + Rᵀ)/2`; the sign follows the
    /// antisymmetric part when it carries one, otherwise the first nonzero axis
    /// component is made positive.
    NearPi,
}

pub fn so3_log(r: &Rotation) -> Vector3<f64> {
    so3_log_with_branch(r).0
}

pub fn so3_log_with_branch(r: &Rotation) -> (Vector3<f64>, LogBranch) {
    let w = unskew(r);
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let s = w.norm();
    let theta = s.atan2(c);
    if c > NEAR_PI_COS {
        if theta < SMALL_ANGLE {
            // θ/sin θ ≈ 1 + θ²/6
            return (w * (1.0 + theta * theta / 6.0), LogBranch::SmallAngle);
        }
        return (w * (theta / s), LogBranch::Regular);
    }
    // a aᵀ = (S - cos θ I) / (1 - cos θ)
    let sym = (r + r.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * c) / (1.0 - c);
    let mut i = 0;
    for j in 1..3 {
        if outer[(j, j)] > outer[(i, i)] {
            i = j;
        }
    }
    let mut axis: Vector3<f64> = outer.column(i).into_owned() / outer[(i, i)].max(0.0).sqrt();
    axis.normalize_mut();
    if s > 1e-12 {
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
    } else if let Some(first) = axis.iter().find(|a| a.abs() > 1e-12) {
        if *first < 0.0 {
            axis = -axis;
        }
    }
    (axis * theta, LogBranch::NearPi)
}

/// Left Jacobian of SO(3).
pub fn so3_left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    Matrix3::identity() + k * cosc(theta) + k * k * sinc3(theta)
}

pub fn so3_left_jacobian_inv(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    // 1/θ² - (1 + cos θ)/(2 θ sin θ)
    let coeff = if theta < SERIES_ANGLE {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30_240.0
    } else {
        let half = 0.5 * theta;
        1.0 / (theta * theta) - half.cos() / (2.0 * theta * half.sin())
    };
    Matrix3::identity() - k * 0.5 + k * k * coeff
}

/// Projects a matrix onto SO(3) by symmetric orthogonalization `M (MᵀM)^{-1/2}`.
///
/// Nearly orthonormal input (the propagation loop) goes through a few Newton
/// steps of the polar iteration; anything else through the SVD.
pub fn orthonormalize(m: &Matrix3<f64>) -> Rotation {
    let i3 = Matrix3::identity();
    let defect = (m.transpose() * m - i3).abs().max();
    if defect < 1e-3 && m.determinant() > 0.0 {
        let mut r = *m;
        for _ in 0..6 {
            let e = r.transpose() * r - i3;
            if e.abs().max() < 1e-15 {
                break;
            }
            r = r * (i3 * 1.5 - (r.transpose() * r) * 0.5);
        }
        return r;
    }
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Element of SE₂(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupState {
    pub rotation: Rotation,
    pub nu: Vector3<f64>,
    pub rho: Vector3<f64>,
}

impl GroupState {
    pub fn new(rotation: Rotation, nu: Vector3<f64>, rho: Vector3<f64>) -> Self {
        Self { rotation, nu, rho }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros(), Vector3::zeros())
    }

    pub fn to_matrix(&self) -> Matrix5 {
        let mut m = Matrix5::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.nu);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.rho);
        m
    }

    /// Unpacks a 5×5 matrix; the bottom rows must equal `[0 0 0 1 0]`, `[0 0 0 0 1]`.
    pub fn from_matrix(m: &Matrix5) -> Result<Self> {
        let expected = Matrix5::identity();
        for j in 0..5 {
            for i in 3..5 {
                if (m[(i, j)] - expected[(i, j)]).abs() > BOTTOM_ROW_TOL {
                    return Err(Error::InvalidGroupElement(format!(
                        "entry ({i},{j}) is {} instead of {}",
                        m[(i, j)],
                        expected[(i, j)]
                    )));
                }
            }
        }
        Ok(Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
            m.fixed_view::<3, 1>(0, 4).into_owned(),
        ))
    }

    pub fn compose(&self, other: &GroupState) -> GroupState {
        GroupState::new(
            self.rotation * other.rotation,
            self.rotation * other.nu + self.nu,
            self.rotation * other.rho + self.rho,
        )
    }

    pub fn inverse(&self) -> GroupState {
        let rt = self.rotation.transpose();
        GroupState::new(rt, -rt * self.nu, -rt * self.rho)
    }

    /// `Ad_χ` such that `(Ad_χ ξ)^∧ = χ ξ^∧ χ⁻¹`.
    pub fn adjoint(&self) -> Matrix9 {
        let r = &self.rotation;
        let mut ad = Matrix9::zeros();
        for k in 0..3 {
            ad.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(r);
        }
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&self.nu) * r));
        ad.fixed_view_mut::<3, 3>(6, 0).copy_from(&(skew(&self.rho) * r));
        ad
    }
}

impl Mul for GroupState {
    type Output = GroupState;

    fn mul(self, rhs: GroupState) -> GroupState {
        self.compose(&rhs)
    }
}

pub fn compose(a: &GroupState, b: &GroupState) -> GroupState {
    a.compose(b)
}

pub fn inverse(a: &GroupState) -> GroupState {
    a.inverse()
}

pub fn adjoint(chi: &GroupState) -> Matrix9 {
    chi.adjoint()
}

pub fn se23_hat(xi: &TangentVec9) -> Matrix5 {
    let mut m = Matrix5::zeros();
    let phi = xi.fixed_rows::<3>(0).into_owned();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&skew(&phi));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.fixed_rows::<3>(3));
    m.fixed_view_mut::<3, 1>(0, 4).copy_from(&xi.fixed_rows::<3>(6));
    m
}

/// Inverse of [`se23_hat`]. Rejects matrices with nonzero bottom rows.
pub fn se23_vee(m: &Matrix5) -> Result<TangentVec9> {
    if let Some(v) = m.fixed_view::<2, 5>(3, 0).iter().find(|v| v.abs() > BOTTOM_ROW_TOL) {
        return Err(Error::InvalidGroupElement(format!(
            "algebra element has bottom-row entry {v}"
        )));
    }
    let phi = unskew(&m.fixed_view::<3, 3>(0, 0).into_owned());
    let mut xi = TangentVec9::zeros();
    xi.fixed_rows_mut::<3>(0).copy_from(&phi);
    xi.fixed_rows_mut::<3>(3).copy_from(&m.fixed_view::<3, 1>(0, 3));
    xi.fixed_rows_mut::<3>(6).copy_from(&m.fixed_view::<3, 1>(0, 4));
    Ok(xi)
}

pub fn se23_exp(xi: &TangentVec9) -> GroupState {
    let phi = xi.fixed_rows::<3>(0).into_owned();
    let jac = so3_left_jacobian(&phi);
    GroupState::new(
        so3_exp(&phi),
        jac * xi.fixed_rows::<3>(3),
        jac * xi.fixed_rows::<3>(6),
    )
}

pub fn se23_log(chi: &GroupState) -> TangentVec9 {
    let phi = so3_log(&chi.rotation);
    let jinv = so3_left_jacobian_inv(&phi);
    let mut xi = TangentVec9::zeros();
    xi.fixed_rows_mut::<3>(0).copy_from(&phi);
    xi.fixed_rows_mut::<3>(3).copy_from(&(jinv * chi.nu));
    xi.fixed_rows_mut::<3>(6).copy_from(&(jinv * chi.rho));
    xi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn basis_skew() {
        let m = skew(&Vector3::x());
        assert_eq!(m, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = so3_exp(&Vector3::new(0.0, 0.0, PI / 2.0));
        assert_relative_eq!(r * Vector3::x(), Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn half_turn_about_x_has_positive_axis() {
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let (phi, branch) = so3_log_with_branch(&r);
        assert_eq!(branch, LogBranch::NearPi);
        assert_relative_eq!(phi, Vector3::new(PI, 0.0, 0.0), epsilon = 1e-15);
        let r = so3_exp(&Vector3::new(0.0, -PI, 0.0));
        assert_relative_eq!(so3_log(&r), Vector3::new(0.0, PI, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn near_pi_keeps_sign() {
        let phi = Vector3::new(-0.3, 0.8, -0.2).normalize() * (PI - 1e-5);
        assert_relative_eq!(so3_log(&so3_exp(&phi)), phi, epsilon = 1e-9);
    }

    #[test]
    fn orthonormalize_fixes_perturbation() {
        let r = so3_exp(&Vector3::new(0.4, -1.0, 2.0));
        let m = r + Matrix3::from_element(1e-6);
        let q = orthonormalize(&m);
        assert_relative_eq!(q.transpose() * q, Matrix3::identity(), epsilon = 1e-14);
        assert_relative_eq!(q.determinant(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(q, r, epsilon = 2e-6);
    }

    #[test]
    fn jacobian_inverse_matches() {
        for phi in [
            Vector3::new(1e-9, 0.0, 0.0),
            Vector3::new(3e-3, -1e-3, 2e-3),
            Vector3::new(0.9, 1.3, -0.4),
        ] {
            let p = so3_left_jacobian(&phi) * so3_left_jacobian_inv(&phi);
            assert_relative_eq!(p, Matrix3::identity(), epsilon = 1e-14);
        }
    }
}
