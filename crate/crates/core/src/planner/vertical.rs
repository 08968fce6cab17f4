//! Vertical COM reference: a sine bump in single support and a sine plus a
//! linear ramp to the next support height in double support.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::planner::gait::GaitTiming;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalParams {
    /// Nominal COM height above the support surface.
    pub z_c0: f64,
    pub a_ss: f64,
    pub a_ds: f64,
    /// COM height change over one step, equal to the stair rise.
    pub delta_z_c: f64,
}

impl VerticalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_c0 > self.a_ss.abs() + self.a_ds.abs() + self.delta_z_c.abs()) {
            return Err(Error::invalid(
                "z_c0",
                format!(
                    "COM height {} must exceed |A_ss| + |A_ds| + |dz| = {}",
                    self.z_c0,
                    self.a_ss.abs() + self.a_ds.abs() + self.delta_z_c.abs()
                ),
            ));
        }
        Ok(())
    }

    pub fn with_delta(self, delta_z_c: f64) -> Self {
        Self { delta_z_c, ..self }
    }
}

/// Absolute COM height with its exact time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalSample {
    pub z: f64,
    pub z_vel: f64,
    pub z_acc: f64,
}

pub fn vertical_reference(t: f64, timing: &GaitTiming, vp: &VerticalParams, support_z: f64) -> VerticalSample {
    if timing.in_single_support(t) {
        let w = PI / timing.single_support;
        let (s, c) = (w * t).sin_cos();
        VerticalSample {
            z: support_z + vp.z_c0 + vp.a_ss * s,
            z_vel: vp.a_ss * w * c,
            z_acc: -vp.a_ss * w * w * s,
        }
    } else {
        let tau = t - timing.single_support;
        let w = PI / timing.double_support;
        let (s, c) = (w * tau).sin_cos();
        let ramp = vp.delta_z_c / timing.double_support;
        VerticalSample {
            z: support_z + vp.z_c0 + vp.a_ds * s + ramp * tau,
            z_vel: vp.a_ds * w * c + ramp,
            z_acc: -vp.a_ds * w * w * s,
        }
    }
}
