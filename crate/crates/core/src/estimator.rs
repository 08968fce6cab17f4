//! Kalman filter over one axis of the jerk-driven triple integrator, fed by
//! ZMP measurements through the time-varying output row.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{output_row, AxisState, DiscreteModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KfState {
    pub x_hat: AxisState,
    pub p: Matrix3<f64>,
    pub q: Matrix3<f64>,
    /// ZMP measurement variance.
    pub r: f64,
}

pub fn default_process_noise() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1e-8, 1e-6, 1e-4))
}

pub const DEFAULT_MEASUREMENT_VAR: f64 = 1e-4;

impl KfState {
    pub fn new(x_hat: AxisState, p: Matrix3<f64>, q: Matrix3<f64>, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::invalid("r", format!("measurement variance must be positive, got {r}")));
        }
        Ok(Self { x_hat, p, q, r })
    }

    /// Filter started at a known state with the default noise model.
    pub fn with_defaults(x_hat: AxisState) -> Self {
        Self {
            x_hat,
            p: default_process_noise(),
            q: default_process_noise(),
            r: DEFAULT_MEASUREMENT_VAR,
        }
    }
}

fn symmetrize(p: Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

pub fn kf_predict(s: &KfState, u: f64, model: &DiscreteModel) -> KfState {
    let x = model.a * s.x_hat.to_vector() + model.b * u;
    let p = model.a * s.p * model.a.transpose() + s.q;
    KfState {
        x_hat: AxisState::from_vector(&x),
        p: symmetrize(p),
        ..*s
    }
}

/// Measurement update with `y = [1, 0, -1/omega^2] x + v`.
pub fn kf_update(s: &KfState, y_meas: f64, omega: f64) -> Result<KfState> {
    let c = output_row(omega);
    let x = s.x_hat.to_vector();
    let innovation = y_meas - (c * x)[0];
    let pc = s.p * c.transpose();
    let cov = (c * pc)[0] + s.r;
    if !(cov > 0.0) || !cov.is_finite() {
        return Err(Error::Numerical(format!("innovation covariance {cov} is not positive")));
    }
    let gain = pc / cov;
    let x = x + gain * innovation;
    // Joseph form keeps P positive semidefinite under roundoff.
    let ikc = Matrix3::identity() - gain * c;
    let p = ikc * s.p * ikc.transpose() + gain * gain.transpose() * s.r;
    Ok(KfState {
        x_hat: AxisState::from_vector(&x),
        p: symmetrize(p),
        ..*s
    })
}
