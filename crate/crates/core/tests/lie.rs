use approx::assert_relative_eq;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use cteskf::lie::{self, GroupState, Matrix5, TangentVec9};

fn vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-scale..scale).prop_map(Vector3::from)
}

/// Rotation vectors strictly inside the principal ball.
fn rotvec() -> impl Strategy<Value = Vector3<f64>> {
    (vec3(1.0), 0.0..3.0f64).prop_map(|(v, a)| if v.norm() < 1e-9 { Vector3::zeros() } else { v.normalize() * a })
}

fn group() -> impl Strategy<Value = GroupState> {
    (rotvec(), vec3(500.0), vec3(1e4)).prop_map(|(p, nu, rho)| GroupState::new(lie::so3_exp(&p), nu, rho))
}

fn tangent(scale: f64) -> impl Strategy<Value = TangentVec9> {
    (rotvec(), vec3(scale), vec3(scale)).prop_map(|(p, a, b)| {
        let mut xi = TangentVec9::zeros();
        xi.fixed_rows_mut::<3>(0).copy_from(&p);
        xi.fixed_rows_mut::<3>(3).copy_from(&a);
        xi.fixed_rows_mut::<3>(6).copy_from(&b);
        xi
    })
}

/// Generic matrix exponential by scaling and squaring of a Taylor series.
fn expm(m: &Matrix5) -> Matrix5 {
    let norm = m.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(s);
    let mut term = Matrix5::identity();
    let mut sum = Matrix5::identity();
    for k in 1..30 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn skew_is_the_cross_product(a in vec3(10.0), b in vec3(10.0)) {
        let d = lie::skew(&a) * b - a.cross(&b);
        prop_assert!(d.norm() <= 1e-15 * (1.0 + a.norm() * b.norm()));
        prop_assert_eq!(lie::unskew(&lie::skew(&a)), a);
    }

    #[test]
    fn so3_exp_gives_rotations(p in rotvec()) {
        let r = lie::so3_exp(&p);
        prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-14);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn so3_log_inverts_exp(p in rotvec()) {
        let back = lie::so3_log(&lie::so3_exp(&p));
        prop_assert!((back - p).norm() < 1e-12 * (1.0 + p.norm()), "{} vs {}", back, p);
    }

    #[test]
    fn so3_jacobian_inverse(p in rotvec()) {
        let j = lie::so3_left_jacobian(&p) * lie::so3_left_jacobian_inv(&p);
        prop_assert!((j - Matrix3::identity()).norm() < 1e-10);
    }

    #[test]
    fn hat_vee_round_trip(xi in tangent(1e3)) {
        prop_assert_eq!(lie::se23_vee(&lie::se23_hat(&xi)).unwrap(), xi);
    }

    #[test]
    fn se23_exp_matches_matrix_exponential(xi in tangent(10.0)) {
        let closed = lie::se23_exp(&xi).to_matrix();
        let series = expm(&lie::se23_hat(&xi));
        prop_assert!((closed - series).norm() < 1e-10 * (1.0 + series.norm()), "{}", (closed - series).norm());
    }

    #[test]
    fn se23_log_inverts_exp(xi in tangent(100.0)) {
        let back = lie::se23_log(&lie::se23_exp(&xi));
        prop_assert!((back - xi).norm() < 1e-9 * (1.0 + xi.norm()));
    }

    #[test]
    fn adjoint_conjugates(chi in group(), xi in tangent(10.0)) {
        let lhs = lie::se23_hat(&(chi.adjoint() * xi));
        let m = chi.to_matrix();
        let rhs = m * lie::se23_hat(&xi) * chi.inverse().to_matrix();
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + m.norm() * m.norm()), "{}", (lhs - rhs).norm());
    }

    #[test]
    fn inverse_is_an_involution(chi in group()) {
        let back = chi.inverse().inverse();
        prop_assert!((back.to_matrix() - chi.to_matrix()).norm() < 1e-13 * (1.0 + chi.to_matrix().norm()));
        let id = chi.compose(&chi.inverse()).to_matrix();
        prop_assert!((id - Matrix5::identity()).norm() < 1e-14 * (1.0 + chi.to_matrix().norm()));
    }

    #[test]
    fn compose_is_the_matrix_product(a in group(), b in group()) {
        let dense = a.to_matrix() * b.to_matrix();
        let blocks = a.compose(&b).to_matrix();
        prop_assert!((dense - blocks).norm() <= 1e-14 * dense.norm());
    }

    #[test]
    fn embedding_round_trips(chi in group()) {
        let m = chi.to_matrix();
        prop_assert_eq!(GroupState::from_matrix(&m).unwrap(), chi);
        prop_assert_eq!(m.fixed_view::<2, 5>(3, 0).into_owned(), Matrix5::identity().fixed_view::<2, 5>(3, 0).into_owned());
    }
}

#[test]
fn small_angle_exp_is_first_order() {
    let p = Vector3::new(1e-6, 2e-6, -1e-6);
    assert_relative_eq!(lie::so3_exp(&p), Matrix3::identity() + lie::skew(&p), epsilon = 1e-11);
}

#[test]
fn log_of_known_rotation() {
    let p = Vector3::new(0.3, -0.2, 0.1);
    assert_relative_eq!(lie::so3_log(&lie::so3_exp(&p)), p, epsilon = 1e-12);
}

#[test]
fn malformed_embeddings_are_rejected() {
    let mut m = Matrix5::identity();
    m[(4, 0)] = 1e-3;
    assert!(GroupState::from_matrix(&m).is_err());
    assert!(lie::se23_vee(&m).is_err());
}
