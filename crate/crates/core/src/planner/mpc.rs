//! Receding-horizon controller: assembles and solves one QP per axis each
//! control cycle and applies the first jerk increment.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::Result;
use crate::model::{dcm_of_state, discretize, AxisState, DiscreteModel};
use crate::planner::gait::{GaitClock, GaitSchedule, GaitTiming};
use crate::planner::horizon::{build_horizon, AxisPlan, HorizonPlan, InputLimits, PlanSample};
use crate::planner::step_adjust::{apply_margin, dcm_extrapolation, StepAdjustPolicy};
use crate::planner::vertical::VerticalParams;
use crate::prediction::{build_tv, HorizonDims, TvPrediction};
use crate::qp::{self, QpProblem, QpStatus};

/// Builds the QP for one axis.
///
/// Decision vector: `nc` jerk increments, plus one trailing ZMP slack when
/// `slack_weight` is given. Rows, in order: upper then lower ZMP bound per
/// sample, upper then lower cumulative jerk bound per move, upper then lower
/// jerk-rate bound per move, and `slack >= 0`.
pub fn assemble_qp(
    pred: &TvPrediction,
    plan: &AxisPlan,
    limits: &InputLimits,
    x_hat: AxisState,
    u_prev: f64,
    rho: f64,
    slack_weight: Option<f64>,
) -> QpProblem {
    let HorizonDims { np, nc } = pred.dims();
    let n = nc + usize::from(slack_weight.is_some());
    let free = pred.free_response(x_hat, u_prev);
    let r = DVector::from_column_slice(&plan.zmp_ref);

    let mut h = DMatrix::zeros(n, n);
    let su_t = pred.su.transpose();
    let hessian = (&su_t * &pred.su + DMatrix::identity(nc, nc) * rho) * 2.0;
    h.view_mut((0, 0), (nc, nc)).copy_from(&hessian);
    let mut g = DVector::zeros(n);
    g.rows_mut(0, nc).copy_from(&(su_t * (&free - r) * 2.0));
    if let Some(w) = slack_weight {
        h[(nc, nc)] = 2.0 * w;
    }

    let rows = 2 * np + 4 * nc + usize::from(slack_weight.is_some());
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let mut row = 0;
    for i in 0..np {
        for (sign, bound) in [(1.0, plan.zmp_hi[i]), (-1.0, -plan.zmp_lo[i])] {
            for j in 0..nc {
                a[(row, j)] = sign * pred.su[(i, j)];
            }
            if slack_weight.is_some() {
                a[(row, nc)] = -1.0;
            }
            b[row] = bound - sign * free[i];
            row += 1;
        }
    }
    for m in 0..nc {
        for (sign, bound) in [(1.0, limits.u_max - u_prev), (-1.0, u_prev - limits.u_min)] {
            for j in 0..=m {
                a[(row, j)] = sign;
            }
            b[row] = bound;
            row += 1;
        }
    }
    for m in 0..nc {
        for (sign, bound) in [(1.0, limits.du_max), (-1.0, -limits.du_min)] {
            a[(row, m)] = sign;
            b[row] = bound;
            row += 1;
        }
    }
    if slack_weight.is_some() {
        a[(row, nc)] = -1.0;
    }
    QpProblem { h, g, a, b }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub dt: f64,
    pub dims: HorizonDims,
    /// Weight on the jerk increments; keeps the Hessian positive definite.
    pub rho: f64,
    pub limits: InputLimits,
    /// Penalty on the ZMP slack used when the hard problem is infeasible.
    pub slack_weight: f64,
    pub max_iter: usize,
    pub policy: StepAdjustPolicy,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            dims: HorizonDims { np: 50, nc: 2 },
            rho: 1e-6,
            limits: InputLimits::default(),
            slack_weight: 1e6,
            max_iter: qp::DEFAULT_MAX_ITER,
            policy: StepAdjustPolicy::default(),
        }
    }
}

/// Per-axis outcome of one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisOutput {
    pub jerk: f64,
    /// COM state one sample ahead under the applied jerk.
    pub planned: AxisState,
    pub status: QpStatus,
    /// Whether the soft (slack) problem had to be solved.
    pub softened: bool,
    pub slack: f64,
    /// Predicted ZMP at the first horizon sample.
    pub predicted_zmp: f64,
    pub landing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub axes: [AxisOutput; 2],
    pub sample: PlanSample,
}

impl ControlOutput {
    pub fn jerk(&self) -> [f64; 2] {
        [self.axes[0].jerk, self.axes[1].jerk]
    }
}

/// State estimate handed to the controller each cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub state: AxisState,
    /// Covariance of the measurement correction applied to `state` this
    /// cycle (prior minus posterior covariance for a Kalman filter).
    pub correction_cov: Matrix3<f64>,
}

impl Estimate {
    /// A noise-free estimate.
    pub fn exact(state: AxisState) -> Self {
        Self {
            state,
            correction_cov: Matrix3::zeros(),
        }
    }
}

/// End-of-step DCM deviation accumulated over one single support phase.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Deviation {
    step: usize,
    mean: [f64; 2],
    var: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct Previous {
    estimate: [AxisState; 2],
    jerk: [f64; 2],
    omega: f64,
}

/// The online planner. Owns the gait clock, the (adjustable) footstep plan
/// and the last applied jerk of each axis.
#[derive(Debug, Clone)]
pub struct Controller {
    pub cfg: ControllerConfig,
    pub timing: GaitTiming,
    pub vertical: VerticalParams,
    schedule: GaitSchedule,
    clock: GaitClock,
    u_prev: [f64; 2],
    previous: Option<Previous>,
    adjusting: Option<Deviation>,
}

impl Controller {
    pub fn new(
        cfg: ControllerConfig,
        timing: GaitTiming,
        vertical: VerticalParams,
        mut schedule: GaitSchedule,
    ) -> Result<Self> {
        vertical.validate()?;
        let preview_steps = (cfg.dims.np as f64 * cfg.dt / timing.step_duration()).ceil() as usize;
        schedule.extend_to(schedule.len() + preview_steps + 1);
        Ok(Self {
            clock: GaitClock::new(cfg.dt),
            cfg,
            timing,
            vertical,
            schedule,
            u_prev: [0.0; 2],
            previous: None,
            adjusting: None,
        })
    }

    pub fn clock(&self) -> &GaitClock {
        &self.clock
    }

    pub fn schedule(&self) -> &GaitSchedule {
        &self.schedule
    }

    pub fn last_jerk(&self) -> [f64; 2] {
        self.u_prev
    }

    pub fn advance(&mut self) {
        self.clock.advance();
    }

    /// Reference, bounds and frequency at the current tick.
    pub fn current_sample(&self) -> Result<PlanSample> {
        crate::planner::horizon::sample_at(
            self.clock.phase(0, &self.timing),
            &self.schedule,
            &self.timing,
            &self.vertical,
        )
    }

    pub fn horizon(&self) -> Result<HorizonPlan> {
        build_horizon(
            &self.clock,
            &self.schedule,
            &self.timing,
            &self.vertical,
            self.cfg.dims.np,
            self.cfg.limits,
        )
    }

    pub fn prediction(&self, plan: &HorizonPlan) -> Result<TvPrediction> {
        let models = plan
            .omega
            .iter()
            .map(|&w| discretize(self.cfg.dt, w))
            .collect::<Result<Vec<DiscreteModel>>>()?;
        build_tv(&models, self.cfg.dims)
    }

    /// Update the pending landing from the DCM deviation that the model
    /// did not predict.
    ///
    /// Each cycle the estimate is compared with the one-step prediction
    /// from the previous estimate and jerk. The DCM part of that innovation
    /// is extrapolated to the end of the step and accumulated over the
    /// single support phase, together with its variance. The landing moves
    /// once the accumulated deviation leaves the compliance margin widened by
    /// `noise_gate` standard deviations. In double support the landing is
    /// frozen.
    fn adjust_landing(&mut self, estimate: &[Estimate; 2], sample: &PlanSample) -> Result<()> {
        let phase = sample.phase;
        if phase.step == 0 || !self.timing.in_single_support(phase.t) {
            return Ok(());
        }
        let mut dev = match self.adjusting {
            Some(d) if d.step == phase.step => d,
            _ => Deviation {
                step: phase.step,
                mean: [0.0; 2],
                var: [0.0; 2],
            },
        };
        if let Some(prev) = self.previous {
            let model = discretize(self.cfg.dt, prev.omega)?;
            let omega = sample.omega;
            let remaining = self.timing.remaining(phase.t);
            let gain = (omega * remaining).exp();
            let d = Vector3::new(1.0, 1.0 / omega, 0.0);
            for axis in 0..2 {
                let predicted = model.propagate(prev.estimate[axis], prev.jerk[axis]);
                dev.mean[axis] += dcm_extrapolation(
                    dcm_of_state(estimate[axis].state, omega),
                    dcm_of_state(predicted, omega),
                    remaining,
                    omega,
                );
                dev.var[axis] += gain * gain * d.dot(&(estimate[axis].correction_cov * d)).max(0.0);
            }
        }
        self.adjusting = Some(dev);
        let policy = self.cfg.policy;
        for axis in 0..2 {
            let nominal = self.schedule.nominal_step_length(phase.step, axis)?;
            let margin = policy.compliance_margin + policy.noise_gate * dev.var[axis].sqrt();
            let length = apply_margin(nominal + dev.mean[axis], nominal, margin, policy.reach(axis, nominal));
            self.schedule.set_step_length(phase.step, axis, length)?;
        }
        Ok(())
    }

    pub fn control_step(&mut self, estimate: [Estimate; 2]) -> Result<ControlOutput> {
        let sample = self.current_sample()?;
        self.adjust_landing(&estimate, &sample)?;
        let plan = self.horizon()?;
        let pred = self.prediction(&plan)?;
        let next_model = discretize(self.cfg.dt, plan.current.omega)?;

        let mut axes = [AxisOutput {
            jerk: 0.0,
            planned: AxisState::default(),
            status: QpStatus::Optimal,
            softened: false,
            slack: 0.0,
            predicted_zmp: 0.0,
            landing: 0.0,
        }; 2];
        for (axis, out) in axes.iter_mut().enumerate() {
            let u_prev = self.u_prev[axis];
            let x_hat = estimate[axis].state;
            let hard = assemble_qp(&pred, &plan.axes[axis], &plan.limits, x_hat, u_prev, self.cfg.rho, None);
            let mut sol = qp::solve(&hard, self.cfg.max_iter)?;
            let mut softened = false;
            let mut slack = 0.0;
            if sol.status != QpStatus::Optimal {
                let soft = assemble_qp(
                    &pred,
                    &plan.axes[axis],
                    &plan.limits,
                    x_hat,
                    u_prev,
                    self.cfg.rho,
                    Some(self.cfg.slack_weight),
                );
                let soft_sol = qp::solve(&soft, self.cfg.max_iter)?;
                slack = soft_sol.z[self.cfg.dims.nc];
                softened = true;
                sol = soft_sol;
            }
            let mut du = sol.z.rows(0, self.cfg.dims.nc).into_owned();
            // A failed solve leaves an arbitrary iterate; the applied move
            // must still respect the input limits.
            let lim = &plan.limits;
            du[0] = du[0].clamp(lim.du_min.max(lim.u_min - u_prev), lim.du_max.min(lim.u_max - u_prev));
            let jerk = u_prev + du[0];
            let y = pred.predict(x_hat, u_prev, &du);
            *out = AxisOutput {
                jerk,
                planned: next_model.propagate(x_hat, jerk),
                status: sol.status,
                softened,
                slack,
                predicted_zmp: y[0],
                landing: self.schedule.landing(sample.phase.step)?.axis(axis),
            };
        }
        let jerk = [axes[0].jerk, axes[1].jerk];
        self.u_prev = jerk;
        self.previous = Some(Previous {
            estimate: [estimate[0].state, estimate[1].state],
            jerk,
            omega: plan.current.omega,
        });
        Ok(ControlOutput {
            axes,
            sample: plan.current,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::ScenarioConfig;

    const W: f64 = 3.132092;

    fn constant_prediction(np: usize, nc: usize) -> TvPrediction {
        let models = vec![discretize(0.02, W).unwrap(); np];
        build_tv(&models, HorizonDims::new(np, nc).unwrap()).unwrap()
    }

    fn flat_plan(np: usize, r: f64, half: f64) -> AxisPlan {
        AxisPlan {
            zmp_ref: vec![r; np],
            zmp_lo: vec![r - half; np],
            zmp_hi: vec![r + half; np],
        }
    }

    fn wide() -> InputLimits {
        InputLimits {
            u_min: -1e3,
            u_max: 1e3,
            du_min: -1e3,
            du_max: 1e3,
        }
    }

    #[test]
    fn equilibrium_needs_no_input() {
        let pred = constant_prediction(50, 2);
        let p = assemble_qp(&pred, &flat_plan(50, 0.1, 0.03), &InputLimits::default(), AxisState::at_rest(0.1), 0.0, 1e-6, None);
        let sol = qp::solve_default(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.z.amax() < 1e-6);
    }

    #[test]
    fn hessian_is_symmetric_and_regularized() {
        let rho = 1e-3;
        let pred = constant_prediction(20, 4);
        let p = assemble_qp(&pred, &flat_plan(20, 0.0, 0.03), &InputLimits::default(), AxisState::at_rest(0.0), 0.0, rho, None);
        assert!((&p.h - p.h.transpose()).amax() < 1e-12);
        let shifted = &p.h - DMatrix::identity(4, 4) * (2.0 * rho);
        assert!(shifted.symmetric_eigenvalues().min() > -1e-10);
    }

    #[test]
    fn unregularized_unconstrained_is_least_squares() {
        let (np, nc) = (5, 2);
        let pred = constant_prediction(np, nc);
        let x0 = AxisState {
            pos: 0.02,
            vel: 0.1,
            acc: -0.2,
        };
        let plan = AxisPlan {
            zmp_ref: (0..np).map(|i| 0.01 * i as f64).collect(),
            zmp_lo: vec![-1e3; np],
            zmp_hi: vec![1e3; np],
        };
        let p = assemble_qp(&pred, &plan, &wide(), x0, 0.3, 0.0, None);
        let sol = qp::solve_default(&p).unwrap();
        let target = DVector::from_column_slice(&plan.zmp_ref) - pred.free_response(x0, 0.3);
        let ls = pred.su.clone().svd(true, true).solve(&target, 1e-14).unwrap();
        assert!((&sol.z - &ls).amax() < 1e-6 * ls.amax().max(1.0));
    }

    /// Cost of a move sequence by direct rollout.
    fn rollout_cost(x0: AxisState, u_prev: f64, du: [f64; 2], r: f64, np: usize, rho: f64) -> Option<f64> {
        let m = discretize(0.02, W).unwrap();
        let (mut x, mut u, mut cost) = (x0, u_prev, rho * (du[0] * du[0] + du[1] * du[1]));
        for i in 0..np {
            if i < 2 {
                u += du[i];
            }
            x = m.propagate(x, u);
            let z = x.pos - x.acc / (W * W);
            if (z - r).abs() > 0.03 {
                return None;
            }
            cost += (z - r).powi(2);
        }
        Some(cost)
    }

    #[test]
    fn small_problem_matches_grid_search() {
        let (np, rho) = (3, 1e-4);
        let x0 = AxisState {
            pos: 0.0,
            vel: 0.05,
            acc: 0.05,
        };
        let r = 0.02;
        let pred = constant_prediction(np, 2);
        let p = assemble_qp(&pred, &flat_plan(np, r, 0.03), &InputLimits::default(), x0, 0.0, rho, None);
        let sol = qp::solve_default(&p).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        // The rate bound is active, so this is not the unconstrained answer.
        assert!(sol.z.amax() > 0.1 - 1e-9);

        let mut best = (f64::INFINITY, [0.0; 2]);
        let n = 400;
        for i in 0..=n {
            for j in 0..=n {
                let du = [-0.1 + 0.2 * i as f64 / n as f64, -0.1 + 0.2 * j as f64 / n as f64];
                if let Some(c) = rollout_cost(x0, 0.0, du, r, np, rho) {
                    if c < best.0 {
                        best = (c, du);
                    }
                }
            }
        }
        assert!((sol.z[0] - best.1[0]).abs() < 1e-3, "{} vs {}", sol.z[0], best.1[0]);
        assert!((sol.z[1] - best.1[1]).abs() < 1e-3, "{} vs {}", sol.z[1], best.1[1]);
    }

    fn table_controller() -> Controller {
        let c = ScenarioConfig::default();
        Controller::new(c.controller().unwrap(), c.timing().unwrap(), c.vertical(), c.schedule().unwrap()).unwrap()
    }

    /// Drive the controller with the state it predicts for itself.
    fn drive(ctrl: &mut Controller, state: &mut [AxisState; 2], cycles: usize) -> ControlOutput {
        let mut last = None;
        for _ in 0..cycles {
            let out = ctrl.control_step([Estimate::exact(state[0]), Estimate::exact(state[1])]).unwrap();
            *state = [out.axes[0].planned, out.axes[1].planned];
            ctrl.advance();
            last = Some(out);
        }
        last.unwrap()
    }

    #[test]
    fn optimal_cycles_keep_the_predicted_zmp_inside() {
        let mut ctrl = table_controller();
        let s = ctrl.schedule();
        let mut state = [
            AxisState::at_rest(s.reference_point(0, 0).unwrap()),
            AxisState::at_rest(s.reference_point(0, 1).unwrap()),
        ];
        for _ in 0..150 {
            let plan = ctrl.horizon().unwrap();
            let out = drive(&mut ctrl, &mut state, 1);
            for (axis, o) in out.axes.iter().enumerate() {
                if o.status == QpStatus::Optimal && !o.softened {
                    let b = &plan.axes[axis];
                    assert!(o.predicted_zmp <= b.zmp_hi[0] + 1e-7 && o.predicted_zmp >= b.zmp_lo[0] - 1e-7);
                }
                assert!(o.jerk.abs() <= 1.5 + 1e-12);
            }
        }
    }

    #[test]
    fn backward_push_moves_the_landing_backward() {
        let mut ctrl = table_controller();
        let s = ctrl.schedule();
        let mut state = [
            AxisState::at_rest(s.reference_point(0, 0).unwrap()),
            AxisState::at_rest(s.reference_point(0, 1).unwrap()),
        ];
        // Into the single support of step 1.
        drive(&mut ctrl, &mut state, 110);
        let nominal = ctrl.schedule().landing(1).unwrap().x;
        state[0].vel -= 0.3;
        let out = drive(&mut ctrl, &mut state, 1);
        assert!(out.axes[0].landing < nominal - 0.02, "{} vs {nominal}", out.axes[0].landing);
    }

    #[test]
    fn landing_is_nominal_without_disturbance() {
        let mut ctrl = table_controller();
        let s = ctrl.schedule().clone();
        let mut state = [
            AxisState::at_rest(s.reference_point(0, 0).unwrap()),
            AxisState::at_rest(s.reference_point(0, 1).unwrap()),
        ];
        for _ in 0..300 {
            let out = drive(&mut ctrl, &mut state, 1);
            let land = s.landing(out.sample.phase.step).unwrap();
            assert!((out.axes[0].landing - land.x).abs() < 1e-12);
            assert!((out.axes[1].landing - land.y).abs() < 1e-12);
        }
    }
}
