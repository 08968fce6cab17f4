//! Acceptance checks shared by the `verify` subcommand and the acceptance
//! test target. Each check carries its own reference computation and does
//! not reuse the code path it is checking.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, RowVector3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::harness::metrics::VIOLATION_TOL;
use crate::harness::runner::{run_scenario, ScenarioRun};
use crate::harness::scenario::{builtin, ScenarioConfig, PUSH_TIME};
use crate::harness::trace::Trace;
use crate::model::{discretize, AxisState};
use crate::prediction::{build_tv, HorizonDims};
use crate::qp::{self, QpProblem, QpStatus};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:<28} {}", self.name, self.detail)
    }
}

pub const PREDICTION: &str = "prediction_oracle";
pub const QP: &str = "qp_oracle";
pub const DIAGONAL_WALK: &str = "diagonal_walk";
pub const STAIR_CLIMB: &str = "stair_climb";
pub const NOISE: &str = "noise_robustness";
pub const HEIGHT: &str = "height_error_robustness";
pub const PUSH: &str = "push_recovery";
pub const DETERMINISM: &str = "determinism";

/// Limits shared by the closed-loop checks.
const JERK_MAX: f64 = 1.5;
const JERK_RATE_MAX: f64 = 0.1;
const INPUT_TOL: f64 = 1e-9;

pub fn run_all() -> Vec<CheckResult> {
    vec![
        prediction_oracle(),
        qp_oracle(),
        diagonal_walk(),
        stair_climb(),
        noise_robustness(),
        height_error_robustness(),
        push_recovery(),
        determinism(),
    ]
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new_inclusive(lo, hi).unwrap().sample(rng)
}

fn count(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    Uniform::new_inclusive(lo, hi).unwrap().sample(rng)
}

pub fn prediction_oracle() -> CheckResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let np = count(&mut rng, 1, 10);
        let nc = count(&mut rng, 1, np);
        let dt = uniform(&mut rng, 0.005, 0.05);
        let models: Vec<_> = (0..np)
            .map(|_| discretize(dt, uniform(&mut rng, 2.5, 4.0)).unwrap())
            .collect();
        let x0 = AxisState {
            pos: uniform(&mut rng, -1.0, 1.0),
            vel: uniform(&mut rng, -1.0, 1.0),
            acc: uniform(&mut rng, -5.0, 5.0),
        };
        let u_prev = uniform(&mut rng, -2.0, 2.0);
        let du = DVector::from_fn(nc, |_, _| uniform(&mut rng, -1.0, 1.0));
        let pred = match build_tv(&models, HorizonDims::new(np, nc).unwrap()) {
            Ok(p) => p,
            Err(e) => return result(PREDICTION, false, format!("build failed: {e}")),
        };
        let y = pred.predict(x0, u_prev, &du);

        // Sequential rollout with the jerk held after the last move.
        let mut x = Vector3::new(x0.pos, x0.vel, x0.acc);
        let mut u = u_prev;
        for (i, m) in models.iter().enumerate() {
            if i < nc {
                u += du[i];
            }
            x = m.a * x + m.b * u;
            let c = RowVector3::new(1.0, 0.0, -1.0 / (m.omega * m.omega));
            worst = worst.max((y[i] - (c * x)[0]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    result(
        PREDICTION,
        worst <= 1e-10 && secs < 5.0,
        format!("1000 instances, max |err| {worst:.2e} (tol 1e-10), {secs:.2} s"),
    )
}

/// Projected gradient on a box, run to a fixed point.
fn projected_gradient(h: &DMatrix<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let lmax = h.symmetric_eigenvalues().max();
    let step = 1.0 / lmax;
    let mut z = DVector::zeros(g.len());
    for _ in 0..200_000 {
        let mut next = &z - (h * &z + g) * step;
        for i in 0..next.len() {
            next[i] = next[i].clamp(lo[i], hi[i]);
        }
        let moved = (&next - &z).amax();
        z = next;
        if moved < 1e-15 {
            break;
        }
    }
    z
}

pub fn qp_oracle() -> CheckResult {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut worst_kkt, mut worst_gap) = (0.0_f64, 0.0_f64);
    let mut not_optimal = 0;
    for _ in 0..200 {
        let n = count(&mut rng, 1, 6);
        let m = DMatrix::from_fn(n, n, |_, _| uniform(&mut rng, -1.0, 1.0));
        let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
        let g = DVector::from_fn(n, |_, _| uniform(&mut rng, -3.0, 3.0));
        let lo = DVector::from_fn(n, |_, _| uniform(&mut rng, -1.0, -0.05));
        let hi = DVector::from_fn(n, |_, _| uniform(&mut rng, 0.05, 1.0));
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = hi[i];
            a[(n + i, i)] = -1.0;
            b[n + i] = -lo[i];
        }
        let p = QpProblem { h: h.clone(), g: g.clone(), a, b };
        let sol = match qp::solve_default(&p) {
            Ok(s) => s,
            Err(e) => return result(QP, false, format!("solver error: {e}")),
        };
        if sol.status != QpStatus::Optimal {
            not_optimal += 1;
            continue;
        }
        worst_kkt = worst_kkt.max(sol.kkt_residual);
        let reference = projected_gradient(&h, &g, &lo, &hi);
        worst_gap = worst_gap.max((&sol.z - reference).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    result(
        QP,
        not_optimal == 0 && worst_kkt <= 1e-8 && worst_gap <= 1e-6 && secs < 10.0,
        format!(
            "200 problems, {not_optimal} not optimal, max KKT {worst_kkt:.2e} (tol 1e-8), \
             max gap to projected gradient {worst_gap:.2e} (tol 1e-6), {secs:.2} s"
        ),
    )
}

/// Out-of-bounds cycles of the true ZMP, counted per axis.
fn bound_violations(trace: &Trace) -> [usize; 2] {
    let mut out = [0; 2];
    for row in &trace.rows {
        for (axis, a) in row.axes.iter().enumerate() {
            if a.zmp_true > a.zmp_hi + VIOLATION_TOL || a.zmp_true < a.zmp_lo - VIOLATION_TOL {
                out[axis] += 1;
            }
        }
    }
    out
}

/// Largest jerk and largest per-cycle jerk change over both axes.
fn input_extremes(trace: &Trace) -> (f64, f64) {
    let (mut jerk, mut rate) = (0.0_f64, 0.0_f64);
    let mut prev = [0.0; 2];
    for row in &trace.rows {
        for (axis, a) in row.axes.iter().enumerate() {
            jerk = jerk.max(a.jerk.abs());
            rate = rate.max((a.jerk - prev[axis]).abs());
            prev[axis] = a.jerk;
        }
    }
    (jerk, rate)
}

fn run_builtin(name: &str) -> Result<ScenarioRun, String> {
    let cfg = builtin(name).map_err(|e| e.to_string())?;
    run_config(&cfg)
}

fn run_config(cfg: &ScenarioConfig) -> Result<ScenarioRun, String> {
    let run = run_scenario(cfg).map_err(|e| e.to_string())?;
    if let Some((row, why)) = &run.metrics.abort {
        return Err(format!("{} aborted at row {row}: {why}", cfg.name));
    }
    Ok(run)
}

/// Steps whose landing was executed during the run.
fn landed_steps(run: &ScenarioRun) -> usize {
    run.trace.rows.last().map_or(0, |r| r.step)
}

pub fn diagonal_walk() -> CheckResult {
    let start = Instant::now();
    let run = match run_builtin("diagonal_walk") {
        Ok(r) => r,
        Err(e) => return result(DIAGONAL_WALK, false, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let v = bound_violations(&run.trace);
    let (jerk, rate) = input_extremes(&run.trace);
    let steps = landed_steps(&run);
    let passed = steps >= run.config.steps
        && v == [0, 0]
        && jerk <= JERK_MAX + INPUT_TOL
        && rate <= JERK_RATE_MAX + INPUT_TOL
        && secs < 30.0;
    result(
        DIAGONAL_WALK,
        passed,
        format!(
            "{steps} steps, ZMP out of bounds x {} / y {} cycles, max |jerk| {jerk:.3}, \
             max |rate| {rate:.3}, softened {}, {secs:.2} s",
            v[0], v[1], run.metrics.slack_activations
        ),
    )
}

/// Closed-form vertical reference for walking up stairs of `rise` per step.
fn stair_height(cfg: &ScenarioConfig, time: f64, rise: f64) -> f64 {
    let t_step = cfg.t_ss + cfg.t_ds;
    let k = ((time + 1e-9) / t_step).floor();
    let tau = time - k * t_step;
    // The first step starts in double stance on level ground.
    let surface = |k: f64| rise * (k - 1.0).max(0.0);
    let base = surface(k);
    let dz = surface(k + 1.0) - base;
    if tau < cfg.t_ss {
        base + cfg.z_c0 + cfg.a_ss * (PI * tau / cfg.t_ss).sin()
    } else {
        let s = tau - cfg.t_ss;
        base + cfg.z_c0 + cfg.a_ds * (PI * s / cfg.t_ds).sin() + dz * s / cfg.t_ds
    }
}

/// Largest gap between the logged vertical reference and the closed form.
pub fn stair_reference_error(run: &ScenarioRun, rise: f64) -> f64 {
    run.trace
        .rows
        .iter()
        .map(|r| (r.z_ref - stair_height(&run.config, r.time, rise)).abs())
        .fold(0.0, f64::max)
}

pub fn stair_climb() -> CheckResult {
    let start = Instant::now();
    let run = match run_builtin("stair_climb") {
        Ok(r) => r,
        Err(e) => return result(STAIR_CLIMB, false, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let rise = 0.1;
    let z_err = stair_reference_error(&run, rise);
    let v = bound_violations(&run.trace);
    let steps = landed_steps(&run);
    let passed = run.config.delta_z_c == rise
        && steps >= run.config.steps
        && z_err <= 1e-12
        && v == [0, 0]
        && secs < 30.0;
    result(
        STAIR_CLIMB,
        passed,
        format!(
            "{steps} steps, max |z_ref - closed form| {z_err:.1e} (tol 1e-12), \
             ZMP out of bounds x {} / y {} cycles, {secs:.2} s",
            v[0], v[1]
        ),
    )
}

pub fn noise_robustness() -> CheckResult {
    let mut violations = 0;
    let mut dcm = 0.0_f64;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut cfg = match builtin("noise_walk") {
            Ok(c) => c,
            Err(e) => return result(NOISE, false, e.to_string()),
        };
        cfg.seed = seed;
        match run_config(&cfg) {
            Ok(run) => {
                violations += bound_violations(&run.trace).iter().sum::<usize>();
                dcm = dcm.max(run.metrics.max_dcm_support_dist);
            }
            Err(e) => failures.push(e),
        }
    }
    let passed = failures.is_empty() && violations == 0 && dcm <= 0.25;
    let mut detail = format!(
        "20 seeds, {} aborted, ZMP out of bounds {violations} axis-cycles, max DCM-support {dcm:.3} m (limit 0.25)",
        failures.len()
    );
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; {first}"));
    }
    result(NOISE, passed, detail)
}

pub fn height_error_robustness() -> CheckResult {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in ["height_p01", "height_m01", "height_p02", "height_m02"] {
        match run_builtin(name) {
            Ok(run) => {
                let v = bound_violations(&run.trace);
                let [dx, dy] = run.metrics.max_tracking_error;
                passed &= v == [0, 0] && dy > dx;
                parts.push(format!("{name}: oob {}/{} dev x {dx:.3} y {dy:.3}", v[0], v[1]));
            }
            Err(e) => {
                passed = false;
                parts.push(e);
            }
        }
    }
    result(HEIGHT, passed, parts.join("; "))
}

pub fn push_recovery() -> CheckResult {
    let mut passed = true;
    let mut parts = Vec::new();
    for name in ["push_p50", "push_m50", "push_p75", "push_m75"] {
        let run = match run_builtin(name) {
            Ok(r) => r,
            Err(e) => {
                passed = false;
                parts.push(e);
                continue;
            }
        };
        let cfg = &run.config;
        let force = cfg.disturbances.first().map_or(0.0, |d| d.force[0]);
        let nominal = match cfg.schedule() {
            Ok(s) => s,
            Err(e) => return result(PUSH, false, e.to_string()),
        };
        let t_step = cfg.t_ss + cfg.t_ds;
        let eps = 1e-9;

        let mut adjusted = false;
        let mut wrong_sign = false;
        let mut recovered = false;
        for row in &run.trace.rows {
            if row.time + eps < PUSH_TIME {
                continue;
            }
            let Ok(land) = nominal.landing(row.step) else { continue };
            if row.time <= PUSH_TIME + 0.2 + eps {
                for axis in 0..2 {
                    let shift = row.landing[axis] - land.axis(axis);
                    if shift.abs() > cfg.compliance_margin {
                        if shift.signum() == force.signum() {
                            adjusted = true;
                        } else {
                            wrong_sign = true;
                        }
                    }
                }
            }
            if row.time > PUSH_TIME && row.time <= PUSH_TIME + 2.0 * t_step + eps && row.dcm_support_dist <= 0.1 {
                recovered = true;
            }
        }
        passed &= adjusted && !wrong_sign && recovered;
        parts.push(format!(
            "{name}: adjusted {} recovered {} max DCM-support {:.3}",
            if wrong_sign { "wrong-sign" } else if adjusted { "yes" } else { "no" },
            if recovered { "yes" } else { "no" },
            run.metrics.max_dcm_support_dist
        ));
    }
    result(PUSH, passed, parts.join("; "))
}

pub fn determinism() -> CheckResult {
    let mut cfg = match builtin("push_p75") {
        Ok(c) => c,
        Err(e) => return result(DETERMINISM, false, e.to_string()),
    };
    cfg.seed = 7;
    let csv = |cfg: &ScenarioConfig| run_scenario(cfg).map(|r| r.trace.to_csv());
    match (csv(&cfg), csv(&cfg)) {
        (Ok(a), Ok(b)) => result(
            DETERMINISM,
            a.as_bytes() == b.as_bytes(),
            format!("push_p75 seed 7 twice, {} bytes, identical {}", a.len(), a == b),
        ),
        (Err(e), _) | (_, Err(e)) => result(DETERMINISM, false, e.to_string()),
    }
}
