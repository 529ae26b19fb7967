use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),
    #[error("time step {0} s is outside (0, {1}] s")]
    InvalidTimeStep(f64, f64),
    #[error("position {0:.3} m from the Earth centre is outside the surface guard")]
    OffSurface(f64),
    #[error("gravity undefined at the Earth centre")]
    ZeroPosition,
    #[error("attitude error of {0} rad is not below pi")]
    AttitudeErrorTooLarge(f64),
    #[error("observation at t = {obs} s does not match filter time {filter} s")]
    TimestampMismatch { obs: f64, filter: f64 },
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
