//! Online biped walking planner built on a time-varying model predictive
//! controller over the linear inverted pendulum, with DCM-based landing
//! adjustment, a vertical COM profile and Kalman-filtered ZMP feedback.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod harness;
pub mod model;
pub mod planner;
pub mod prediction;
pub mod qp;
pub mod sim;

pub use error::{Error, Result};
