//! Footstep schedule, phase clock and the piecewise ZMP reference.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitTiming {
    pub single_support: f64,
    pub double_support: f64,
}

impl GaitTiming {
    pub fn new(single_support: f64, double_support: f64) -> Result<Self> {
        if !(single_support > 0.0) || !(double_support > 0.0) {
            return Err(Error::invalid(
                "timing",
                format!("SS and DS durations must be positive, got {single_support} / {double_support}"),
            ));
        }
        Ok(Self {
            single_support,
            double_support,
        })
    }

    pub fn step_duration(&self) -> f64 {
        self.single_support + self.double_support
    }

    pub fn in_single_support(&self, t: f64) -> bool {
        t < self.single_support
    }

    /// Time left until the end of the step.
    pub fn remaining(&self, t: f64) -> f64 {
        self.step_duration() - t
    }
}

/// Discrete clock counting control ticks from the start of the walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitClock {
    pub tick: u64,
    pub dt: f64,
}

/// Step index and time since that step started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub step: usize,
    pub t: f64,
}

impl GaitClock {
    pub fn new(dt: f64) -> Self {
        Self { tick: 0, dt }
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }

    /// Phase `ahead` ticks into the future.
    pub fn phase(&self, ahead: usize, timing: &GaitTiming) -> Phase {
        let ticks = self.tick + ahead as u64;
        let per_step = timing.step_duration() / self.dt;
        let rounded = per_step.round();
        if (per_step - rounded).abs() < 1e-9 && rounded >= 1.0 {
            let per_step = rounded as u64;
            Phase {
                step: (ticks / per_step) as usize,
                t: (ticks % per_step) as f64 * self.dt,
            }
        } else {
            let time = ticks as f64 * self.dt;
            let step = (time / timing.step_duration() + 1e-12).floor();
            Phase {
                step: step as usize,
                t: (time - step * timing.step_duration()).max(0.0),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Footstep {
    pub x: f64,
    pub y: f64,
    pub surface_z: f64,
}

impl Footstep {
    pub fn new(x: f64, y: f64, surface_z: f64) -> Self {
        Self { x, y, surface_z }
    }

    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            _ => self.y,
        }
    }

    fn axis_mut(&mut self, axis: usize) -> &mut f64 {
        match axis {
            0 => &mut self.x,
            _ => &mut self.y,
        }
    }
}

/// Closed interval along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(center: f64, half: f64) -> Self {
        Self {
            lo: center - half,
            hi: center + half,
        }
    }

    pub fn hull(self, other: Interval) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Distance outside the interval, zero inside.
    pub fn excess(&self, v: f64) -> f64 {
        (self.lo - v).max(v - self.hi).max(0.0)
    }
}

/// Shape of the footstep sequence produced by [`GaitSchedule::walk`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkPattern {
    /// Forward advance of each new foot relative to the stance foot.
    pub step_length: f64,
    /// Lateral offset of each foot from the walking centerline.
    pub half_separation: f64,
    /// Lateral advance of the centerline per step.
    pub lateral_drift: f64,
    /// Height change of the support surface per step (stair rise).
    pub rise: f64,
}

/// Planned footsteps.
///
/// Step 0 is the initial double stance on `footsteps[0]` (right) and
/// `footsteps[1]` (left); its reference point is the midpoint of the two
/// feet. Every later step `i` stands on `footsteps[i]` and lands the swing
/// foot on `footsteps[i + 1]`.
#[derive(Debug, Clone)]
pub struct GaitSchedule {
    footsteps: Vec<Footstep>,
    nominal: Vec<Footstep>,
    pub foot_length: f64,
    /// Fraction of the foot usable for the ZMP.
    pub support_scale: f64,
}

impl GaitSchedule {
    pub fn new(footsteps: Vec<Footstep>, foot_length: f64) -> Result<Self> {
        if !(foot_length > 0.0) {
            return Err(Error::invalid("foot_length", format!("must be positive, got {foot_length}")));
        }
        if footsteps.len() < 3 {
            return Err(Error::invalid("footsteps", "need both initial feet and one landing"));
        }
        Ok(Self {
            nominal: footsteps.clone(),
            footsteps,
            foot_length,
            support_scale: 0.9,
        })
    }

    /// Walking schedule with `n_steps` landings after the initial stance.
    pub fn walk(pattern: &WalkPattern, n_steps: usize, foot_length: f64) -> Result<Self> {
        let foot = |k: usize| {
            // Odd indices are left feet.
            let side = if k % 2 == 1 { 1.0 } else { -1.0 };
            let advance = k.saturating_sub(1) as f64;
            Footstep::new(
                advance * pattern.step_length,
                advance * pattern.lateral_drift + side * pattern.half_separation,
                advance * pattern.rise,
            )
        };
        Self::new((0..n_steps + 2).map(foot).collect(), foot_length)
    }

    pub fn len(&self) -> usize {
        self.footsteps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.footsteps.is_empty()
    }

    pub fn footsteps(&self) -> &[Footstep] {
        &self.footsteps
    }

    pub fn footstep(&self, k: usize) -> Result<Footstep> {
        self.footsteps.get(k).copied().ok_or(Error::ScheduleExhausted {
            needed: k,
            available: self.footsteps.len(),
        })
    }

    pub fn half_support(&self) -> f64 {
        self.support_scale * self.foot_length / 2.0
    }

    /// ZMP target while standing in step `step`.
    pub fn reference_point(&self, step: usize, axis: usize) -> Result<f64> {
        if step == 0 {
            Ok(0.5 * (self.footstep(0)?.axis(axis) + self.footstep(1)?.axis(axis)))
        } else {
            Ok(self.footstep(step)?.axis(axis))
        }
    }

    pub fn support_surface(&self, step: usize) -> Result<f64> {
        if step == 0 {
            Ok(self.footstep(0)?.surface_z.max(self.footstep(1)?.surface_z))
        } else {
            Ok(self.footstep(step)?.surface_z)
        }
    }

    /// Landing target of the swing foot in step `step`.
    pub fn landing(&self, step: usize) -> Result<Footstep> {
        self.footstep(step + 1)
    }

    /// Planned step length: landing minus reference point.
    pub fn step_length(&self, step: usize, axis: usize) -> Result<f64> {
        Ok(self.landing(step)?.axis(axis) - self.reference_point(step, axis)?)
    }

    /// Step length of the originally generated plan.
    pub fn nominal_step_length(&self, step: usize, axis: usize) -> Result<f64> {
        let landing = self.nominal.get(step + 1).ok_or(Error::ScheduleExhausted {
            needed: step + 1,
            available: self.nominal.len(),
        })?;
        let origin = if step == 0 {
            0.5 * (self.nominal[0].axis(axis) + self.nominal[1].axis(axis))
        } else {
            self.nominal[step].axis(axis)
        };
        Ok(landing.axis(axis) - origin)
    }

    /// ZMP bounds of a single foot.
    pub fn foot_box(&self, k: usize, axis: usize) -> Result<Interval> {
        Ok(Interval::around(self.footstep(k)?.axis(axis), self.half_support()))
    }

    /// ZMP bounds while standing in step `step` (SS part).
    pub fn stance_bounds(&self, step: usize, axis: usize) -> Result<Interval> {
        if step == 0 {
            Ok(self.foot_box(0, axis)?.hull(self.foot_box(1, axis)?))
        } else {
            self.foot_box(step, axis)
        }
    }

    /// ZMP bounds in DS: hull of the stance support and the landed foot.
    pub fn transfer_bounds(&self, step: usize, axis: usize) -> Result<Interval> {
        Ok(self.stance_bounds(step, axis)?.hull(self.foot_box(step + 1, axis)?))
    }

    pub fn bounds(&self, step: usize, t: f64, timing: &GaitTiming, axis: usize) -> Result<Interval> {
        if timing.in_single_support(t) {
            self.stance_bounds(step, axis)
        } else {
            self.transfer_bounds(step, axis)
        }
    }

    /// Move the landing of `step` to `reference + length` along `axis`,
    /// re-chaining every later footstep by its nominal displacement.
    pub fn set_step_length(&mut self, step: usize, axis: usize, length: f64) -> Result<()> {
        let origin = self.reference_point(step, axis)?;
        let landing = step + 1;
        if landing >= self.footsteps.len() {
            return Err(Error::ScheduleExhausted {
                needed: landing,
                available: self.footsteps.len(),
            });
        }
        *self.footsteps[landing].axis_mut(axis) = origin + length;
        for k in (landing + 1)..self.footsteps.len() {
            let delta = self.nominal[k].axis(axis) - self.nominal[k - 1].axis(axis);
            let prev = self.footsteps[k - 1].axis(axis);
            *self.footsteps[k].axis_mut(axis) = prev + delta;
        }
        Ok(())
    }

    /// Append copies of the last nominal displacement until the schedule
    /// holds `len` footsteps.
    pub fn extend_to(&mut self, len: usize) {
        while self.footsteps.len() < len {
            let n = self.nominal.len();
            // Repeat the two-step cycle so feet keep alternating.
            let (a, b) = (self.nominal[n - 3], self.nominal[n - 2]);
            let last_nominal = self.nominal[n - 1];
            let next_nominal = Footstep::new(
                last_nominal.x + (b.x - a.x),
                last_nominal.y + (b.y - a.y),
                last_nominal.surface_z + (b.surface_z - a.surface_z),
            );
            let prev = *self.footsteps.last().unwrap();
            self.footsteps.push(Footstep::new(
                prev.x + next_nominal.x - last_nominal.x,
                prev.y + next_nominal.y - last_nominal.y,
                prev.surface_z + next_nominal.surface_z - last_nominal.surface_z,
            ));
            self.nominal.push(next_nominal);
        }
    }
}

/// Piecewise ZMP reference of one step: the support point during SS, then a
/// linear ramp that reaches `support + step_length` at the end of DS.
pub fn zmp_reference(t: f64, timing: &GaitTiming, support: f64, step_length: f64) -> f64 {
    if timing.in_single_support(t) {
        support
    } else {
        support + (t - timing.single_support) / timing.double_support * step_length
    }
}
