//! DCM-based landing adjustment.
//!
//! With the ZMP held on the stance foot the DCM obeys
//! `d(zeta)/dt = omega (zeta - f)`, so its offset from the foot grows as
//! `exp(omega t)`. Extrapolating the current offset to the end of the step
//! gives the step length that would let the robot come to rest.

use crate::planner::gait::GaitTiming;

/// Admissible landing offsets relative to the stance foot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reach {
    pub min: f64,
    pub max: f64,
}

impl Reach {
    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAdjustPolicy {
    /// Dead band around the nominal step length.
    pub compliance_margin: f64,
    pub reach_x: Reach,
    /// Outer lateral reach; the inner bound is `lateral_keepout`.
    pub reach_y: f64,
    /// Minimum lateral clearance between the landing and the stance foot.
    pub lateral_keepout: f64,
    /// Standard deviations of the deviation's estimation uncertainty added
    /// to the dead band, so measurement noise alone does not move the foot.
    pub noise_gate: f64,
}

impl Default for StepAdjustPolicy {
    fn default() -> Self {
        Self {
            compliance_margin: 0.02,
            reach_x: Reach { min: -0.4, max: 0.4 },
            reach_y: 0.3,
            lateral_keepout: 0.05,
            noise_gate: 3.0,
        }
    }
}

impl StepAdjustPolicy {
    /// Reach along `axis` for a swing foot whose nominal step is `nominal`.
    /// Laterally the landing stays on the swing foot's own side.
    pub fn reach(&self, axis: usize, nominal: f64) -> Reach {
        if axis == 0 {
            return self.reach_x;
        }
        if nominal >= 0.0 {
            Reach {
                min: self.lateral_keepout,
                max: self.reach_y,
            }
        } else {
            Reach {
                min: -self.reach_y,
                max: -self.lateral_keepout,
            }
        }
    }
}

/// `(dcm - anchor) * exp(omega * remaining)`.
pub fn dcm_extrapolation(dcm: f64, anchor: f64, remaining: f64, omega: f64) -> f64 {
    (dcm - anchor) * (omega * remaining).exp()
}

/// Keep `nominal` while `raw` is inside the compliance margin, otherwise
/// saturate `raw` into the reachable interval.
pub fn apply_margin(raw: f64, nominal: f64, margin: f64, reach: Reach) -> f64 {
    if (raw - nominal).abs() <= margin {
        nominal
    } else {
        reach.clamp(raw)
    }
}

/// Step length from the DCM measured `t` seconds into the step, anchored on
/// the stance foot at `f_i`.
#[allow(clippy::too_many_arguments)]
pub fn adjust_step(
    dcm: f64,
    f_i: f64,
    t: f64,
    timing: &GaitTiming,
    omega: f64,
    policy: &StepAdjustPolicy,
    axis: usize,
    nominal: f64,
) -> f64 {
    let raw = dcm_extrapolation(dcm, f_i, timing.remaining(t), omega);
    apply_margin(raw, nominal, policy.compliance_margin, policy.reach(axis, nominal))
}

#[cfg(test)]
mod tests {
    use super::*;

    const W: f64 = 3.132092;

    fn loose() -> StepAdjustPolicy {
        StepAdjustPolicy {
            compliance_margin: 0.0,
            reach_x: Reach { min: -10.0, max: 10.0 },
            reach_y: 10.0,
            lateral_keepout: 0.0,
            noise_gate: 0.0,
        }
    }

    #[test]
    fn zero_remaining_time() {
        let tm = GaitTiming::new(1.5, 0.5).unwrap();
        let s = adjust_step(0.33, 0.2, 2.0, &tm, W, &loose(), 0, 0.0);
        assert!((s - 0.13).abs() < 1e-15);
    }

    #[test]
    fn extrapolation_matches_integrated_dcm() {
        // Oracle: RK4 on d(zeta)/dt = omega (zeta - f) over the remaining 0.2 s.
        let (f, mut zeta) = (0.2, 0.25);
        let n = 20_000;
        let h = 0.2 / n as f64;
        let rhs = |z: f64| W * (z - f);
        for _ in 0..n {
            let k1 = rhs(zeta);
            let k2 = rhs(zeta + 0.5 * h * k1);
            let k3 = rhs(zeta + 0.5 * h * k2);
            let k4 = rhs(zeta + h * k3);
            zeta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let integrated = zeta - f;
        assert!((integrated - 0.0935449).abs() < 1e-7);

        let tm = GaitTiming::new(1.5, 0.5).unwrap();
        let s = adjust_step(0.25, 0.2, 1.8, &tm, W, &loose(), 0, 0.0);
        assert!((s - integrated).abs() < 1e-12);
    }

    #[test]
    fn inside_margin_keeps_nominal() {
        let tm = GaitTiming::new(1.5, 0.5).unwrap();
        let policy = StepAdjustPolicy::default();
        // DCM exactly on the nominal end-of-step extrapolation.
        let nominal = 0.2;
        let remaining: f64 = 0.9;
        let dcm = 0.1 + nominal * (-W * remaining).exp();
        assert_eq!(adjust_step(dcm, 0.1, 2.0 - remaining, &tm, W, &policy, 0, nominal), nominal);
        // A small offset inside the band is ignored as well.
        assert_eq!(apply_margin(0.21, 0.2, 0.02, policy.reach_x), 0.2);
    }

    #[test]
    fn outside_margin_saturates() {
        let policy = StepAdjustPolicy::default();
        assert_eq!(apply_margin(0.9, 0.2, 0.02, policy.reach(0, 0.2)), 0.4);
        assert_eq!(apply_margin(0.3, 0.2, 0.02, policy.reach(0, 0.2)), 0.3);
        assert_eq!(apply_margin(0.01, 0.1, 0.02, policy.reach(1, 0.1)), 0.05);
        assert_eq!(apply_margin(0.2, -0.1, 0.02, policy.reach(1, -0.1)), -0.05);
    }
}
