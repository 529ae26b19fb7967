//! GNSS velocity and odometer observation models.

use std::fmt;

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::errorstate::{ErrorParameterization, ATT, POS, VEL};
use crate::ins::{EarthModel, NavState};
use crate::lie::skew;

pub type ObservationMatrix = SMatrix<f64, 3, 15>;

/// Velocity in the e frame from a GNSS receiver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnssVelObs {
    pub time: f64,
    pub vel: Vector3<f64>,
    pub sigma: Vector3<f64>,
}

/// Body-frame wheel velocity: forward speed plus zero lateral and vertical
/// pseudo-measurements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdoObs {
    pub time: f64,
    pub vel_body: Vector3<f64>,
    pub sigma: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObsKind {
    GnssVel,
    Odo,
}

impl fmt::Display for ObsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObsKind::GnssVel => "gnss-vel",
            ObsKind::Odo => "odo",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observation {
    GnssVel(GnssVelObs),
    Odo(OdoObs),
}

impl Observation {
    pub fn time(&self) -> f64 {
        match self {
            Observation::GnssVel(o) => o.time,
            Observation::Odo(o) => o.time,
        }
    }

    pub fn kind(&self) -> ObsKind {
        match self {
            Observation::GnssVel(_) => ObsKind::GnssVel,
            Observation::Odo(_) => ObsKind::Odo,
        }
    }

    pub fn value(&self) -> Vector3<f64> {
        match self {
            Observation::GnssVel(o) => o.vel,
            Observation::Odo(o) => o.vel_body,
        }
    }

    pub fn sigma(&self) -> Vector3<f64> {
        match self {
            Observation::GnssVel(o) => o.sigma,
            Observation::Odo(o) => o.sigma,
        }
    }
}

impl From<GnssVelObs> for Observation {
    fn from(o: GnssVelObs) -> Self {
        Observation::GnssVel(o)
    }
}

impl From<OdoObs> for Observation {
    fn from(o: OdoObs) -> Self {
        Observation::Odo(o)
    }
}

/// Observation predicted from the state, `ŷ`.
pub fn predict(x: &NavState, kind: ObsKind) -> Vector3<f64> {
    match kind {
        ObsKind::GnssVel => x.vel,
        ObsKind::Odo => x.attitude.transpose() * x.vel,
    }
}

/// `δz = ŷ − ỹ`. The observation must be stamped within `tolerance` of the state.
pub fn innovation(x: &NavState, obs: &Observation, tolerance: f64) -> Result<Vector3<f64>> {
    if (obs.time() - x.time).abs() > tolerance {
        return Err(Error::TimestampMismatch { obs: obs.time(), filter: x.time });
    }
    Ok(predict(x, obs.kind()) - obs.value())
}

/// `H` with `δz ≈ H ξ` for the error `ξ` of the given parameterization.
pub fn observation_matrix(
    param: ErrorParameterization,
    x: &NavState,
    kind: ObsKind,
    earth: &EarthModel,
) -> ObservationMatrix {
    use ErrorParameterization::*;
    let i3 = Matrix3::identity();
    let om = earth.omega_skew();
    let c = &x.attitude;
    let ct = c.transpose();
    let (att, vel, pos) = match (kind, param) {
        (ObsKind::GnssVel, AdditiveEkf) => (Matrix3::zeros(), i3, Matrix3::zeros()),
        (ObsKind::GnssVel, LeftInvariant) => (Matrix3::zeros(), -c, om * c),
        (ObsKind::GnssVel, RightInvariant) => {
            (skew(&x.inertial_velocity(earth)) - om * skew(&x.pos), -i3, om)
        }
        (ObsKind::Odo, AdditiveEkf) => (ct * skew(&x.vel), ct, Matrix3::zeros()),
        (ObsKind::Odo, LeftInvariant) => {
            let nu = x.inertial_velocity(earth);
            (skew(&(ct * (-nu + om * x.pos))), -i3, ct * om * c)
        }
        (ObsKind::Odo, RightInvariant) => (-ct * skew(&x.pos) * om, -ct, ct * om),
    };
    let mut h = ObservationMatrix::zeros();
    h.fixed_view_mut::<3, 3>(0, ATT).copy_from(&att);
    h.fixed_view_mut::<3, 3>(0, VEL).copy_from(&vel);
    h.fixed_view_mut::<3, 3>(0, POS).copy_from(&pos);
    h
}

pub fn noise_covariance(obs: &Observation) -> Matrix3<f64> {
    Matrix3::from_diagonal(&obs.sigma().component_mul(&obs.sigma()))
}
