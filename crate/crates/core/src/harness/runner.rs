//! Closed-loop driver: measure, filter, plan, actuate.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::estimator::{kf_predict, kf_update, KfState};
use crate::harness::metrics::Metrics;
use crate::harness::scenario::ScenarioConfig;
use crate::harness::trace::{AxisRecord, Trace, TraceRow};
use crate::model::{dcm_of_state, discretize, natural_frequency, AxisState, JerkCommand, PendulumParams};
use crate::planner::{AxisOutput, Controller, Estimate, GaitTiming, PlanSample};
use crate::qp::QpStatus;
use crate::sim::{measure, plant_step, NoiseSource, PlantState};

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub trace: Trace,
    pub metrics: Metrics,
}

fn status_label(out: &AxisOutput) -> &'static str {
    match (out.status, out.softened) {
        (QpStatus::Optimal, false) => "optimal",
        (QpStatus::Optimal, true) => "soft",
        (QpStatus::Infeasible, _) => "infeasible",
        (QpStatus::MaxIter, _) => "max_iter",
    }
}

/// Distance from the DCM to the closest foot center in contact.
fn dcm_support_distance(ctrl: &Controller, sample: &PlanSample, timing: &GaitTiming, dcm: [f64; 2]) -> Result<f64> {
    let sched = ctrl.schedule();
    let step = sample.phase.step;
    let mut feet = Vec::with_capacity(2);
    if step == 0 {
        feet.push(sched.footstep(0)?);
        feet.push(sched.footstep(1)?);
    } else {
        feet.push(sched.footstep(step)?);
        if !timing.in_single_support(sample.phase.t) {
            feet.push(sched.footstep(step + 1)?);
        }
    }
    Ok(feet
        .iter()
        .map(|f| (dcm[0] - f.x).hypot(dcm[1] - f.y))
        .fold(f64::INFINITY, f64::min))
}

fn true_omega(cfg: &ScenarioConfig, sample: &PlanSample, support_z: f64) -> Result<f64> {
    natural_frequency(&PendulumParams::new(
        sample.vertical.z - support_z + cfg.plant_height_offset,
        sample.vertical.z_acc,
    ))
}

/// Run one scenario to completion. Configuration errors are returned as
/// `Err`; failures during the run stop it early and are reported through
/// `Metrics::abort` together with the partial trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    let timing = cfg.timing()?;
    let schedule = cfg.schedule()?;
    let mut ctrl = Controller::new(cfg.controller()?, timing, cfg.vertical(), schedule)?;

    let start = [
        ctrl.schedule().reference_point(0, 0)?,
        ctrl.schedule().reference_point(0, 1)?,
    ];
    let mut plant = PlantState::new([AxisState::at_rest(start[0]), AxisState::at_rest(start[1])], cfg.mass)?;
    let q = Matrix3::from_diagonal(&Vector3::new(cfg.kf_q[0], cfg.kf_q[1], cfg.kf_q[2]));
    let mut filters = [
        KfState::new(plant.axes[0], q, q, cfg.kf_r)?,
        KfState::new(plant.axes[1], q, q, cfg.kf_r)?,
    ];
    let mut noise = NoiseSource::new(cfg.noise())?;

    let cycles = cfg.cycles();
    let mut trace = Trace {
        rows: Vec::with_capacity(cycles),
    };
    let mut abort = None;
    for row in 0..cycles {
        match cycle(cfg, &timing, &mut ctrl, &mut plant, &mut filters, &mut noise) {
            Ok(r) => trace.rows.push(r),
            Err(e) => {
                abort = Some((row, e.to_string()));
                break;
            }
        }
        if !plant.is_finite() {
            abort = Some((row, Error::NonFinite { row }.to_string()));
            break;
        }
    }
    let mut metrics = Metrics::from_trace(&trace, abort.is_none());
    metrics.abort = abort;
    Ok(ScenarioRun {
        config: cfg.clone(),
        trace,
        metrics,
    })
}

fn cycle(
    cfg: &ScenarioConfig,
    timing: &GaitTiming,
    ctrl: &mut Controller,
    plant: &mut PlantState,
    filters: &mut [KfState; 2],
    noise: &mut NoiseSource,
) -> Result<TraceRow> {
    let sample = ctrl.current_sample()?;
    let support_z = ctrl.schedule().support_surface(sample.phase.step)?;
    let omega_true = true_omega(cfg, &sample, support_z)?;

    let measured = measure(plant, sample.omega, noise);
    let mut estimate = [Estimate::exact(AxisState::default()); 2];
    for ((f, y), e) in filters.iter_mut().zip(measured).zip(estimate.iter_mut()) {
        let prior = f.p;
        *f = kf_update(f, y, sample.omega)?;
        *e = Estimate {
            state: f.x_hat,
            correction_cov: prior - f.p,
        };
    }
    let out = ctrl.control_step(estimate)?;

    let zmp_true = plant.zmp(omega_true);
    let dcm = [
        dcm_of_state(plant.axes[0], omega_true),
        dcm_of_state(plant.axes[1], omega_true),
    ];
    let mut axes = [AxisRecord::default(); 2];
    for (axis, rec) in axes.iter_mut().enumerate() {
        let s = plant.axes[axis];
        *rec = AxisRecord {
            zmp_ref: out.sample.zmp_ref[axis],
            zmp_true: zmp_true[axis],
            zmp_measured: measured[axis],
            zmp_lo: out.sample.bounds[axis].lo,
            zmp_hi: out.sample.bounds[axis].hi,
            pos: s.pos,
            vel: s.vel,
            acc: s.acc,
            dcm: dcm[axis],
            jerk: out.axes[axis].jerk,
            qp_status: status_label(&out.axes[axis]),
        };
    }
    let row = TraceRow {
        time: ctrl.clock().time(),
        axes,
        z_ref: out.sample.vertical.z,
        step: out.sample.phase.step,
        dcm_support_dist: dcm_support_distance(ctrl, &out.sample, timing, dcm)?,
        landing: [out.axes[0].landing, out.axes[1].landing],
    };

    let jerk = out.jerk();
    *plant = plant_step(plant, [JerkCommand(jerk[0]), JerkCommand(jerk[1])], &cfg.disturbances, cfg.t_s)?;
    let model = discretize(cfg.t_s, out.sample.omega)?;
    for (f, u) in filters.iter_mut().zip(jerk) {
        *f = kf_predict(f, u, &model);
    }
    ctrl.advance();
    Ok(row)
}
