//! Linear inverted pendulum relations for one horizontal axis.
//!
//! The COM is driven by its jerk, so each axis is a triple integrator with
//! state `(pos, vel, acc)`. The pendulum only enters through the output map
//! `zmp = pos - acc / omega^2` and through the DCM `pos + vel / omega`.

use nalgebra::{Matrix3, RowVector3, Vector3};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// COM position, velocity and acceleration along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisState {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

impl AxisState {
    pub const fn new(pos: f64, vel: f64, acc: f64) -> Self {
        Self { pos, vel, acc }
    }

    pub fn at_rest(pos: f64) -> Self {
        Self::new(pos, 0.0, 0.0)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.pos, self.vel, self.acc)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.pos.is_finite() && self.vel.is_finite() && self.acc.is_finite()
    }
}

/// COM jerk, the manipulated variable of every axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JerkCommand(pub f64);

/// Quantities that set the pendulum's natural frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    /// COM height above the current support surface.
    pub com_height_rel: f64,
    /// Vertical COM acceleration.
    pub com_vert_acc: f64,
    pub gravity: f64,
}

impl PendulumParams {
    pub fn new(com_height_rel: f64, com_vert_acc: f64) -> Self {
        Self {
            com_height_rel,
            com_vert_acc,
            gravity: GRAVITY,
        }
    }
}

/// `omega = sqrt((g + z_acc) / h)` with `h` the COM height above the support.
pub fn natural_frequency(params: &PendulumParams) -> Result<f64> {
    let PendulumParams {
        com_height_rel,
        com_vert_acc,
        gravity,
    } = *params;
    if !(com_height_rel > 0.0) || !com_height_rel.is_finite() {
        return Err(Error::Domain {
            param: "com_height_rel",
            value: com_height_rel,
            reason: "COM height above the support must be positive",
        });
    }
    let numerator = gravity + com_vert_acc;
    if !(numerator > 0.0) || !numerator.is_finite() {
        return Err(Error::Domain {
            param: "com_vert_acc",
            value: com_vert_acc,
            reason: "gravity + vertical acceleration must be positive",
        });
    }
    Ok((numerator / com_height_rel).sqrt())
}

/// Zero-order-hold discretization of the jerk-driven triple integrator,
/// together with the frequency that defines its ZMP output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    pub step: f64,
    pub a: Matrix3<f64>,
    pub b: Vector3<f64>,
    pub omega: f64,
}

pub fn discretize(step: f64, omega: f64) -> Result<DiscreteModel> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step", format!("sample time must be positive, got {step}")));
    }
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
    }
    let t = step;
    #[rustfmt::skip]
    let a = Matrix3::new(
        1.0, t,   t * t / 2.0,
        0.0, 1.0, t,
        0.0, 0.0, 1.0,
    );
    let b = Vector3::new(t * t * t / 6.0, t * t / 2.0, t);
    Ok(DiscreteModel { step, a, b, omega })
}

impl DiscreteModel {
    /// `[1, 0, -1/omega^2]`, mapping the state to its ZMP.
    pub fn output_row(&self) -> RowVector3<f64> {
        output_row(self.omega)
    }

    pub fn propagate(&self, state: AxisState, jerk: f64) -> AxisState {
        AxisState::from_vector(&(self.a * state.to_vector() + self.b * jerk))
    }

    pub fn output(&self, state: AxisState) -> f64 {
        zmp_of_state(state, self.omega)
    }
}

pub fn output_row(omega: f64) -> RowVector3<f64> {
    RowVector3::new(1.0, 0.0, -1.0 / (omega * omega))
}

pub fn zmp_of_state(s: AxisState, omega: f64) -> f64 {
    s.pos - s.acc / (omega * omega)
}

/// Divergent component of motion.
pub fn dcm_of_state(s: AxisState, omega: f64) -> f64 {
    s.pos + s.vel / omega
}
