//! Error-state Kalman filters for an ECEF strapdown INS in three error
//! parameterizations (additive, left-invariant, right-invariant on SE₂(3)),
//! with covariance switch and covariance transformation between them, plus a
//! simulation and replay harness.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod errorstate;
pub mod filter;
pub mod ins;
pub mod lie;
pub mod sensors;
pub mod sim;

pub use error::{Error, Result};
// public signatures use nalgebra types
pub use nalgebra;
