//! Online constraint generator: previews the ZMP reference, the support
//! bounds and the pendulum frequency over the prediction window.

use crate::error::Result;
use crate::model::{natural_frequency, PendulumParams, GRAVITY};
use crate::planner::gait::{zmp_reference, GaitClock, GaitSchedule, GaitTiming, Interval, Phase};
use crate::planner::vertical::{vertical_reference, VerticalParams, VerticalSample};

/// Jerk bounds and per-cycle jerk-rate bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputLimits {
    pub u_min: f64,
    pub u_max: f64,
    pub du_min: f64,
    pub du_max: f64,
}

impl Default for InputLimits {
    fn default() -> Self {
        Self {
            u_min: -1.5,
            u_max: 1.5,
            du_min: -0.1,
            du_max: 0.1,
        }
    }
}

/// Everything the planner needs to know about one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSample {
    pub phase: Phase,
    pub omega: f64,
    pub vertical: VerticalSample,
    pub zmp_ref: [f64; 2],
    pub bounds: [Interval; 2],
}

#[derive(Debug, Clone, Default)]
pub struct AxisPlan {
    pub zmp_ref: Vec<f64>,
    pub zmp_lo: Vec<f64>,
    pub zmp_hi: Vec<f64>,
}

/// Previewed references and bounds for samples `1..=np` ahead of `current`.
#[derive(Debug, Clone)]
pub struct HorizonPlan {
    pub current: PlanSample,
    pub omega: Vec<f64>,
    pub axes: [AxisPlan; 2],
    pub limits: InputLimits,
}

impl HorizonPlan {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Reference, bounds and frequency at `phase`.
pub fn sample_at(
    phase: Phase,
    sched: &GaitSchedule,
    timing: &GaitTiming,
    vp: &VerticalParams,
) -> Result<PlanSample> {
    let support_z = sched.support_surface(phase.step)?;
    let rise = sched.landing(phase.step)?.surface_z - support_z;
    let vertical = vertical_reference(phase.t, timing, &vp.with_delta(rise), support_z);
    let omega = natural_frequency(&PendulumParams {
        com_height_rel: vertical.z - support_z,
        com_vert_acc: vertical.z_acc,
        gravity: GRAVITY,
    })?;
    let mut zmp_ref = [0.0; 2];
    let mut bounds = [Interval { lo: 0.0, hi: 0.0 }; 2];
    for axis in 0..2 {
        let support = sched.reference_point(phase.step, axis)?;
        let length = sched.step_length(phase.step, axis)?;
        zmp_ref[axis] = zmp_reference(phase.t, timing, support, length);
        bounds[axis] = sched.bounds(phase.step, phase.t, timing, axis)?;
    }
    Ok(PlanSample {
        phase,
        omega,
        vertical,
        zmp_ref,
        bounds,
    })
}

pub fn build_horizon(
    clock: &GaitClock,
    sched: &GaitSchedule,
    timing: &GaitTiming,
    vp: &VerticalParams,
    np: usize,
    limits: InputLimits,
) -> Result<HorizonPlan> {
    let current = sample_at(clock.phase(0, timing), sched, timing, vp)?;
    let mut omega = Vec::with_capacity(np);
    let mut axes: [AxisPlan; 2] = Default::default();
    for i in 1..=np {
        let s = sample_at(clock.phase(i, timing), sched, timing, vp)?;
        omega.push(s.omega);
        for (axis, plan) in axes.iter_mut().enumerate() {
            plan.zmp_ref.push(s.zmp_ref[axis]);
            plan.zmp_lo.push(s.bounds[axis].lo);
            plan.zmp_hi.push(s.bounds[axis].hi);
        }
    }
    Ok(HorizonPlan {
        current,
        omega,
        axes,
        limits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::planner::gait::WalkPattern;

    fn setup(rise: f64, a_ss: f64, a_ds: f64) -> (GaitSchedule, GaitTiming, VerticalParams) {
        let pattern = WalkPattern {
            step_length: 0.2,
            half_separation: 0.05,
            lateral_drift: 0.0,
            rise,
        };
        (
            GaitSchedule::walk(&pattern, 6, 0.075).unwrap(),
            GaitTiming::new(1.5, 0.5).unwrap(),
            VerticalParams {
                z_c0: 1.0,
                a_ss,
                a_ds,
                delta_z_c: rise,
            },
        )
    }

    #[test]
    fn mid_single_support_bounds() {
        let (sched, tm, vp) = setup(0.0, 0.0135, 0.00135);
        let mut clock = GaitClock::new(0.02);
        clock.tick = 100 + 10; // step 1, t = 0.2 s
        let plan = build_horizon(&clock, &sched, &tm, &vp, 50, InputLimits::default()).unwrap();
        let f = sched.footstep(1).unwrap();
        assert!((plan.axes[0].zmp_lo[0] - (f.x - 0.03375)).abs() < 1e-15);
        assert!((plan.axes[0].zmp_hi[0] - (f.x + 0.03375)).abs() < 1e-15);
        assert!((plan.axes[1].zmp_lo[0] - (f.y - 0.03375)).abs() < 1e-15);
        for (axis, p) in plan.axes.iter().enumerate() {
            for i in 0..50 {
                assert!(p.zmp_lo[i] <= p.zmp_ref[i] && p.zmp_ref[i] <= p.zmp_hi[i], "axis {axis} sample {i}");
            }
        }
    }

    #[test]
    fn flat_constant_height_gives_constant_frequency() {
        let (sched, tm, vp) = setup(0.0, 0.0, 0.0);
        let clock = GaitClock::new(0.02);
        let plan = build_horizon(&clock, &sched, &tm, &vp, 50, InputLimits::default()).unwrap();
        for w in &plan.omega {
            assert!((w - 3.132092).abs() < 1e-6);
            assert_eq!(*w, plan.omega[0]);
        }
    }

    #[test]
    fn stair_frequencies_follow_vertical_plan() {
        let (sched, tm, vp) = setup(0.1, 0.0135, 0.00135);
        let mut clock = GaitClock::new(0.02);
        clock.tick = 160; // step 1 DS, rising to the first stair
        let plan = build_horizon(&clock, &sched, &tm, &vp, 50, InputLimits::default()).unwrap();
        let distinct = plan.omega.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(distinct > 40);
        for (i, w) in plan.omega.iter().enumerate() {
            // Independent re-derivation from the closed-form height profile.
            let ticks = 160 + i + 1;
            let (step, t) = (ticks / 100, (ticks % 100) as f64 * 0.02);
            let (rel, acc) = if t < 1.5 {
                let s = (std::f64::consts::PI / 1.5 * t).sin();
                (1.0 + 0.0135 * s, -0.0135 * (std::f64::consts::PI / 1.5).powi(2) * s)
            } else {
                let tau = t - 1.5;
                let s = (std::f64::consts::PI / 0.5 * tau).sin();
                let rise = if step == 0 { 0.0 } else { 0.1 };
                (
                    1.0 + 0.00135 * s + rise * tau / 0.5,
                    -0.00135 * (std::f64::consts::PI / 0.5).powi(2) * s,
                )
            };
            let expected = ((9.81 + acc) / rel).sqrt();
            assert!((w - expected).abs() < 1e-12, "sample {i}: {w} vs {expected}");
        }
    }

    #[test]
    fn short_schedule_reports_exhaustion() {
        let (sched, tm, vp) = setup(0.0, 0.0, 0.0);
        let mut clock = GaitClock::new(0.02);
        clock.tick = 650;
        let err = build_horizon(&clock, &sched, &tm, &vp, 50, InputLimits::default()).unwrap_err();
        assert!(matches!(err, Error::ScheduleExhausted { .. }));
    }
}
