use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ImuSpec, TruthSeries};
use crate::error::{Error, Result};
use crate::ins::{EarthModel, ImuSample};
use crate::sensors::{GnssVelObs, OdoObs};

// independent random streams per sensor
const IMU_STREAM: u64 = 1;
const GNSS_STREAM: u64 = 2;
const ODO_STREAM: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: &Vector3<f64>) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let n: f64 = StandardNormal.sample(rng);
        n * sigma[i]
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticImu {
    pub samples: Vec<ImuSample>,
    /// Constant gyro bias drawn for this seed (rad/s).
    pub gyro_bias: Vector3<f64>,
    /// Constant accelerometer bias drawn for this seed (m/s²).
    pub accel_bias: Vector3<f64>,
}

/// Ideal rates and specific forces from inverse mechanization of the analytic
/// trajectory, evaluated at the middle of each sampling interval, plus a random
/// constant bias and white noise per the spec. One sample per truth interval,
/// stamped at the interval end.
pub fn synthesize_imu(truth: &TruthSeries, spec: &ImuSpec, seed: u64, earth: &EarthModel) -> Result<SyntheticImu> {
    let track = truth
        .track
        .as_ref()
        .ok_or_else(|| Error::Config("IMU synthesis needs an analytic trajectory".into()))?;
    let mut rng = rng(seed, IMU_STREAM);
    let gyro_bias = gaussian3(&mut rng, &Vector3::repeat(spec.gyro_bias_si()));
    let accel_bias = gaussian3(&mut rng, &Vector3::repeat(spec.accel_bias_si()));
    let om = earth.omega_skew();
    let mut samples = Vec::with_capacity(truth.len().saturating_sub(1));
    for w in truth.states.windows(2) {
        let (t0, t1) = (w[0].time, w[1].time);
        let k = track.kinematics(0.5 * (t0 + t1));
        let ct = k.attitude.transpose();
        let gyro = k.omega_eb + ct * earth.omega_ie;
        let accel = ct * (k.acc + 2.0 * om * k.vel - earth.gravity(&k.pos)?);
        let rate = 1.0 / (t1 - t0);
        let gn = gaussian3(&mut rng, &Vector3::repeat(spec.arw_si() * rate.sqrt()));
        let an = gaussian3(&mut rng, &Vector3::repeat(spec.vrw_si() * rate.sqrt()));
        samples.push(ImuSample::new(t1, gyro + gyro_bias + gn, accel + accel_bias + an));
    }
    Ok(SyntheticImu { samples, gyro_bias, accel_bias })
}

fn observation_indices(truth: &TruthSeries, rate: f64) -> Result<impl Iterator<Item = usize> + '_> {
    if truth.len() < 2 {
        return Ok((0..0).step_by(1));
    }
    let truth_rate = 1.0 / (truth.states[1].time - truth.states[0].time);
    let step = (truth_rate / rate).round();
    if step < 1.0 || ((truth_rate / rate) - step).abs() > 1e-6 {
        return Err(Error::Config(format!(
            "observation rate {rate} Hz does not divide the truth rate {truth_rate} Hz"
        )));
    }
    let step = step as usize;
    Ok((step..truth.len()).step_by(step))
}

/// Truth e-frame velocity plus white noise, sampled at `rate`.
pub fn synthesize_gnss(truth: &TruthSeries, sigma: Vector3<f64>, rate: f64, seed: u64) -> Result<Vec<GnssVelObs>> {
    let mut rng = rng(seed, GNSS_STREAM);
    Ok(observation_indices(truth, rate)?
        .map(|k| {
            let s = &truth.states[k];
            GnssVelObs { time: s.time, vel: s.vel + gaussian3(&mut rng, &sigma), sigma }
        })
        .collect())
}

/// Truth body-frame velocity plus white noise, sampled at `rate`.
pub fn synthesize_odo(truth: &TruthSeries, sigma: Vector3<f64>, rate: f64, seed: u64) -> Result<Vec<OdoObs>> {
    let mut rng = rng(seed, ODO_STREAM);
    Ok(observation_indices(truth, rate)?
        .map(|k| {
            let s = &truth.states[k];
            let body = s.attitude.transpose() * s.vel;
            OdoObs { time: s.time, vel_body: body + gaussian3(&mut rng, &sigma), sigma }
        })
        .collect())
}

/// Averages consecutive groups of `factor` samples into one sample stamped at
/// the group's end. A trailing partial group is dropped.
pub fn downsample_imu(samples: &[ImuSample], factor: usize) -> Vec<ImuSample> {
    assert!(factor > 0, "downsampling factor must be positive");
    samples
        .chunks_exact(factor)
        .map(|c| {
            let n = c.len() as f64;
            let gyro = c.iter().map(|s| s.gyro).sum::<Vector3<f64>>() / n;
            let accel = c.iter().map(|s| s.accel).sum::<Vector3<f64>>() / n;
            ImuSample::new(c[c.len() - 1].time, gyro, accel)
        })
        .collect()
}
