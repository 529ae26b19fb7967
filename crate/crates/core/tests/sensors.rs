use nalgebra::{Matrix3, Vector3};

use cteskf::errorstate::{ErrorParameterization, VEL};
use cteskf::ins::{self, EarthModel, NavState};
use cteskf::lie;
use cteskf::sensors::{self, GnssVelObs, ObsKind, Observation, OdoObs};

fn state(attitude: Matrix3<f64>, vel: Vector3<f64>) -> NavState {
    NavState::new(attitude, vel, ins::geodetic_to_ecef(0.4, 1.0, 10.0), 2.0)
}

fn gnss(vel: Vector3<f64>, sigma: Vector3<f64>) -> Observation {
    GnssVelObs { time: 2.0, vel, sigma }.into()
}

#[test]
fn perfect_observations_leave_no_innovation() {
    let x = state(lie::so3_exp(&Vector3::new(0.1, -0.4, 2.0)), Vector3::new(3.0, -1.0, 0.5));
    let odo: Observation = OdoObs { time: 2.0, vel_body: x.attitude.transpose() * x.vel, sigma: Vector3::repeat(0.1) }.into();
    assert_eq!(sensors::innovation(&x, &gnss(x.vel, Vector3::repeat(0.2)), 1e-3).unwrap(), Vector3::zeros());
    assert_eq!(sensors::innovation(&x, &odo, 1e-3).unwrap(), Vector3::zeros());
}

#[test]
fn innovation_is_predicted_minus_measured() {
    let x = state(Matrix3::identity(), Vector3::new(1.0, 0.0, 0.0));
    let dz = sensors::innovation(&x, &gnss(Vector3::zeros(), Vector3::repeat(0.2)), 1e-3).unwrap();
    assert_eq!(dz, Vector3::new(1.0, 0.0, 0.0));

    let yawed = state(lie::so3_exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2)), Vector3::new(1.0, 0.0, 0.0));
    let reading = Vector3::new(0.5, 0.0, 0.0);
    let odo: Observation = OdoObs { time: 2.0, vel_body: reading, sigma: Vector3::repeat(0.1) }.into();
    let dz = sensors::innovation(&yawed, &odo, 1e-3).unwrap();
    assert!((dz - (Vector3::new(0.0, -1.0, 0.0) - reading)).norm() < 1e-15);
}

#[test]
fn stale_observations_are_rejected() {
    let x = state(Matrix3::identity(), Vector3::zeros());
    let late = GnssVelObs { time: 2.01, vel: Vector3::zeros(), sigma: Vector3::repeat(0.2) }.into();
    assert!(sensors::innovation(&x, &late, 1e-3).is_err());
    assert!(sensors::innovation(&x, &late, 0.02).is_ok());
}

#[test]
fn noise_covariance_is_diagonal_in_sigma() {
    let r = sensors::noise_covariance(&gnss(Vector3::repeat(0.2), Vector3::repeat(0.2)));
    assert!((r - Matrix3::identity() * 0.04).norm() < 1e-16);
    let odo: Observation = OdoObs { time: 0.0, vel_body: Vector3::zeros(), sigma: Vector3::repeat(0.1) }.into();
    assert!((sensors::noise_covariance(&odo) - Matrix3::identity() * 0.01).norm() < 1e-16);
    let r = sensors::noise_covariance(&gnss(Vector3::zeros(), Vector3::new(0.1, 0.2, 0.3)));
    assert_eq!(r, Matrix3::from_diagonal(&Vector3::new(0.1f64.powi(2), 0.2f64.powi(2), 0.3f64.powi(2))));
}

#[test]
fn ekf_gnss_matrix_selects_velocity() {
    let x = state(lie::so3_exp(&Vector3::new(0.3, 0.2, 0.1)), Vector3::new(4.0, 2.0, 0.0));
    let h = sensors::observation_matrix(ErrorParameterization::AdditiveEkf, &x, ObsKind::GnssVel, &EarthModel::default());
    let mut expected = sensors::ObservationMatrix::zeros();
    expected.fixed_view_mut::<3, 3>(0, VEL).copy_from(&Matrix3::identity());
    assert_eq!(h, expected);
}
