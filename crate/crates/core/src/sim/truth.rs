use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector2, Vector3};

use super::{ScenarioConfig, Trajectory};
use crate::error::Result;
use crate::ins::{self, EarthModel, NavState};

/// `C_b^e` from a `[w, x, y, z]` unit quaternion.
pub fn quat_to_dcm(q: [f64; 4]) -> Matrix3<f64> {
    UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner()
}

pub fn dcm_to_quat(c: &Matrix3<f64>) -> [f64; 4] {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*c));
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    [q.w, q.i, q.j, q.k]
}

/// Continuous truth at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    /// `C_b^e`
    pub attitude: Matrix3<f64>,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
    /// Acceleration relative to the Earth, e frame.
    pub acc: Vector3<f64>,
    /// Body rate relative to the Earth, body frame.
    pub omega_eb: Vector3<f64>,
}

// local north/east motion of a level vehicle: position, velocity, acceleration,
// heading and heading rate
struct Planar {
    p: Vector2<f64>,
    v: Vector2<f64>,
    a: Vector2<f64>,
    heading: f64,
    heading_rate: f64,
}

fn from_velocity(p: Vector2<f64>, v: Vector2<f64>, a: Vector2<f64>) -> Planar {
    let n2 = v.norm_squared();
    Planar { p, v, a, heading: v.y.atan2(v.x), heading_rate: (v.x * a.y - v.y * a.x) / n2 }
}

/// Analytic trajectory placed at a geodetic origin.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    trajectory: Trajectory,
    c_ne: Matrix3<f64>,
    r0: Vector3<f64>,
    // waypoint knots: times, positions, tangents
    knots: Vec<(f64, Vector2<f64>, Vector2<f64>)>,
    loop_time: f64,
}

impl Track {
    pub fn new(trajectory: &Trajectory, origin: [f64; 3]) -> Self {
        let (lat, lon) = (origin[0].to_radians(), origin[1].to_radians());
        let mut track = Track {
            trajectory: trajectory.clone(),
            c_ne: ins::ned_to_ecef(lat, lon),
            r0: ins::geodetic_to_ecef(lat, lon, origin[2]),
            knots: Vec::new(),
            loop_time: 0.0,
        };
        if let Trajectory::Waypoint { points, speed } = trajectory {
            let pts: Vec<Vector2<f64>> = points.iter().map(|p| Vector2::new(p[0], p[1])).collect();
            let n = pts.len();
            let mut times = vec![0.0];
            for i in 0..n {
                let seg = (pts[(i + 1) % n] - pts[i]).norm() / speed;
                times.push(times[i] + seg);
            }
            track.loop_time = times[n];
            for i in 0..n {
                let prev = (i + n - 1) % n;
                let dt_prev = times[i] - times[prev] + if i == 0 { track.loop_time } else { 0.0 };
                let dt_next = times[i + 1] - times[i];
                let tangent = (pts[(i + 1) % n] - pts[prev]) / (dt_prev + dt_next);
                track.knots.push((times[i], pts[i], tangent));
            }
            track.knots.push((track.loop_time, pts[0], track.knots[0].2));
        }
        track
    }

    fn planar(&self, t: f64) -> Planar {
        match &self.trajectory {
            Trajectory::Stationary { heading } => Planar {
                p: Vector2::zeros(),
                v: Vector2::zeros(),
                a: Vector2::zeros(),
                heading: heading.to_radians(),
                heading_rate: 0.0,
            },
            Trajectory::Circle { radius, speed } => {
                let w = speed / radius;
                let (s, c) = (w * t).sin_cos();
                Planar {
                    p: Vector2::new(radius * s, radius * (1.0 - c)),
                    v: Vector2::new(speed * c, speed * s),
                    a: Vector2::new(-speed * w * s, speed * w * c),
                    heading: w * t,
                    heading_rate: w,
                }
            }
            Trajectory::FigureEight { size, period } => {
                let w = 2.0 * std::f64::consts::PI / period;
                let (s1, c1) = (w * t).sin_cos();
                let (s2, c2) = (2.0 * w * t).sin_cos();
                from_velocity(
                    Vector2::new(size * s1, 0.5 * size * s2),
                    Vector2::new(size * w * c1, size * w * c2),
                    Vector2::new(-size * w * w * s1, -2.0 * size * w * w * s2),
                )
            }
            Trajectory::Waypoint { .. } => {
                let tl = t.rem_euclid(self.loop_time);
                let i = self.knots.partition_point(|k| k.0 <= tl).saturating_sub(1).min(self.knots.len() - 2);
                let (t0, p0, m0) = self.knots[i];
                let (t1, p1, m1) = self.knots[i + 1];
                let h = t1 - t0;
                let s = (tl - t0) / h;
                // cubic Hermite basis and its derivatives
                let (s2, s3) = (s * s, s * s * s);
                let p = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                    + m0 * h * (s3 - 2.0 * s2 + s)
                    + p1 * (-2.0 * s3 + 3.0 * s2)
                    + m1 * h * (s3 - s2);
                let v = (p0 * (6.0 * s2 - 6.0 * s) + m0 * h * (3.0 * s2 - 4.0 * s + 1.0)
                    + p1 * (-6.0 * s2 + 6.0 * s)
                    + m1 * h * (3.0 * s2 - 2.0 * s))
                    / h;
                let a = (p0 * (12.0 * s - 6.0) + m0 * h * (6.0 * s - 4.0) + p1 * (-12.0 * s + 6.0)
                    + m1 * h * (6.0 * s - 2.0))
                    / (h * h);
                from_velocity(p, v, a)
            }
        }
    }

    pub fn kinematics(&self, t: f64) -> Kinematics {
        let m = self.planar(t);
        let lift = |v: Vector2<f64>| self.c_ne * Vector3::new(v.x, v.y, 0.0);
        let c_bn = Matrix3::new(
            m.heading.cos(), -m.heading.sin(), 0.0,
            m.heading.sin(), m.heading.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        Kinematics {
            attitude: self.c_ne * c_bn,
            vel: lift(m.v),
            pos: self.r0 + lift(m.p),
            acc: lift(m.a),
            omega_eb: Vector3::new(0.0, 0.0, m.heading_rate),
        }
    }

    /// Local north-east-down frame at the origin, `C_n^e`.
    pub fn ned_frame(&self) -> Matrix3<f64> {
        self.c_ne
    }
}

/// Reference states on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthSeries {
    pub states: Vec<NavState>,
    /// Attitude of each state as a `[w, x, y, z]` quaternion; the states'
    /// matrices are derived from these so that files round-trip exactly.
    pub quats: Vec<[f64; 4]>,
    /// Analytic source, when synthetic.
    pub track: Option<Track>,
}

impl TruthSeries {
    pub fn from_records(times: &[f64], quats: Vec<[f64; 4]>, vel: &[Vector3<f64>], pos: &[Vector3<f64>]) -> Self {
        let states = times
            .iter()
            .zip(&quats)
            .zip(vel.iter().zip(pos))
            .map(|((&t, &q), (&v, &r))| NavState::new(quat_to_dcm(q), v, r, t))
            .collect();
        TruthSeries { states, quats, track: None }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State stamped within `tol` of `t`, searching forward from `*cursor`.
    pub fn at(&self, t: f64, cursor: &mut usize, tol: f64) -> Option<&NavState> {
        while *cursor < self.states.len() && self.states[*cursor].time < t - tol {
            *cursor += 1;
        }
        self.states.get(*cursor).filter(|s| (s.time - t).abs() <= tol)
    }
}

/// Samples the scenario's analytic trajectory at the IMU rate, `t = k / rate`.
pub fn generate_truth(cfg: &ScenarioConfig, earth: &EarthModel) -> Result<TruthSeries> {
    cfg.validate()?;
    let track = Track::new(&cfg.trajectory, cfg.origin);
    let n = (cfg.duration * cfg.imu.rate).round() as usize;
    let mut states = Vec::with_capacity(n + 1);
    let mut quats = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / cfg.imu.rate;
        let kin = track.kinematics(t);
        let q = dcm_to_quat(&kin.attitude);
        let s = NavState::new(quat_to_dcm(q), kin.vel, kin.pos, t);
        s.validate(earth)?;
        states.push(s);
        quats.push(q);
    }
    Ok(TruthSeries { states, quats, track: Some(track) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quaternion_round_trip() {
        let c = crate::lie::so3_exp(&Vector3::new(0.3, -2.0, 1.0));
        assert_relative_eq!(quat_to_dcm(dcm_to_quat(&c)), c, epsilon = 1e-15);
        assert!(dcm_to_quat(&c)[0] >= 0.0);
    }

    #[test]
    fn waypoint_loop_is_continuous() {
        let traj = Trajectory::Waypoint { points: vec![[0.0, 0.0], [80.0, 10.0], [60.0, 70.0], [-10.0, 40.0]], speed: 6.0 };
        let track = Track::new(&traj, [30.0, 114.0, 0.0]);
        let lt = track.loop_time;
        let a = track.kinematics(lt - 1e-9);
        let b = track.kinematics(lt + 1e-9);
        assert!((a.pos - b.pos).norm() < 1e-6);
        assert!((a.vel - b.vel).norm() < 1e-6);
        for k in 0..1000 {
            assert!(track.kinematics(k as f64 * lt / 1000.0).vel.norm() > 0.5);
        }
    }
}
