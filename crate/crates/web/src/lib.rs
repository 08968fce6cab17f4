//! WebAssembly bindings for the browser demo in `www/`.
//!
//! The `*_impl` functions hold the logic and return plain Rust errors so the
//! crate can be tested natively; the exported wrappers only convert errors.

use wasm_bindgen::prelude::*;

use tvmpc::harness::{builtin, builtin_scenarios, run_scenario};
use tvmpc::model::{natural_frequency, PendulumParams};
use tvmpc::planner::{adjust_step, vertical_reference, GaitTiming, StepAdjustPolicy, VerticalParams};

/// Columns of a finished run, one entry per control cycle.
#[wasm_bindgen]
#[derive(Debug, Clone, Default)]
pub struct Simulation {
    time: Vec<f64>,
    zmp_ref: [Vec<f64>; 2],
    zmp_true: [Vec<f64>; 2],
    zmp_lo: [Vec<f64>; 2],
    zmp_hi: [Vec<f64>; 2],
    com: [Vec<f64>; 2],
    dcm: [Vec<f64>; 2],
    z_ref: Vec<f64>,
    summary: String,
}

#[wasm_bindgen]
impl Simulation {
    pub fn time(&self) -> Vec<f64> {
        self.time.clone()
    }

    /// `axis` 0 is sagittal (x), 1 is lateral (y).
    pub fn zmp_ref(&self, axis: usize) -> Vec<f64> {
        self.zmp_ref[axis.min(1)].clone()
    }

    pub fn zmp_true(&self, axis: usize) -> Vec<f64> {
        self.zmp_true[axis.min(1)].clone()
    }

    pub fn zmp_lo(&self, axis: usize) -> Vec<f64> {
        self.zmp_lo[axis.min(1)].clone()
    }

    pub fn zmp_hi(&self, axis: usize) -> Vec<f64> {
        self.zmp_hi[axis.min(1)].clone()
    }

    pub fn com(&self, axis: usize) -> Vec<f64> {
        self.com[axis.min(1)].clone()
    }

    pub fn dcm(&self, axis: usize) -> Vec<f64> {
        self.dcm[axis.min(1)].clone()
    }

    pub fn z_ref(&self) -> Vec<f64> {
        self.z_ref.clone()
    }

    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

/// Built-in scenario names, one per line.
#[wasm_bindgen]
pub fn scenario_names() -> String {
    builtin_scenarios()
        .iter()
        .map(|b| b.config.name.clone())
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn simulate_impl(name: &str, overrides: &str) -> Result<Simulation, String> {
    let mut cfg = builtin(name).map_err(|e| e.to_string())?;
    cfg.apply_text(overrides).map_err(|e| e.to_string())?;
    let run = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let mut sim = Simulation::default();
    for row in &run.trace.rows {
        sim.time.push(row.time);
        sim.z_ref.push(row.z_ref);
        for (axis, a) in row.axes.iter().enumerate() {
            sim.zmp_ref[axis].push(a.zmp_ref);
            sim.zmp_true[axis].push(a.zmp_true);
            sim.zmp_lo[axis].push(a.zmp_lo);
            sim.zmp_hi[axis].push(a.zmp_hi);
            sim.com[axis].push(a.pos);
            sim.dcm[axis].push(a.dcm);
        }
    }
    let m = &run.metrics;
    sim.summary = format!(
        "{}: {} cycles, completed {}, ZMP violations {}, softened {}, max |zmp-ref| x {:.3} y {:.3} m, max DCM-support {:.3} m",
        cfg.name,
        run.trace.rows.len(),
        m.completed,
        m.hard_violations,
        m.slack_activations,
        m.max_tracking_error[0],
        m.max_tracking_error[1],
        m.max_dcm_support_dist
    );
    if let Some((row, why)) = &m.abort {
        sim.summary.push_str(&format!(", aborted at row {row}: {why}"));
    }
    Ok(sim)
}

/// Run a built-in scenario with optional `key = value` overrides, one per
/// line.
#[wasm_bindgen]
pub fn simulate(name: &str, overrides: &str) -> Result<Simulation, JsError> {
    simulate_impl(name, overrides).map_err(|e| JsError::new(&e))
}

/// Vertical COM reference and its pendulum frequency over `steps` steps,
/// sampled every `dt`, interleaved as `[t, z, omega, t, z, omega, ...]`.
pub fn vertical_profile_impl(rise: f64, a_ss: f64, a_ds: f64, steps: usize, dt: f64) -> Result<Vec<f64>, String> {
    let timing = GaitTiming::new(1.5, 0.5).map_err(|e| e.to_string())?;
    let vp = VerticalParams {
        z_c0: 1.0,
        a_ss,
        a_ds,
        delta_z_c: rise,
    };
    vp.validate().map_err(|e| e.to_string())?;
    if dt.is_nan() || dt <= 0.0 {
        return Err("dt must be positive".into());
    }
    let t_step = timing.step_duration();
    let n = (steps as f64 * t_step / dt).round() as usize;
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let time = k as f64 * dt;
        let step = (time / t_step + 1e-9).floor();
        let tau = time - step * t_step;
        let support = rise * step;
        let v = vertical_reference(tau, &timing, &vp, support);
        let omega = natural_frequency(&PendulumParams::new(v.z - support, v.z_acc)).map_err(|e| e.to_string())?;
        out.extend([time, v.z, omega]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn vertical_profile(rise: f64, a_ss: f64, a_ds: f64, steps: usize, dt: f64) -> Result<Vec<f64>, JsError> {
    vertical_profile_impl(rise, a_ss, a_ds, steps, dt).map_err(|e| JsError::new(&e))
}

/// Sagittal step length chosen by the landing adjustment for a DCM
/// `dcm_offset` ahead of the stance foot, `t` seconds into a step whose
/// nominal length is `nominal`.
#[wasm_bindgen]
pub fn adjusted_step(dcm_offset: f64, t: f64, nominal: f64, margin: f64) -> f64 {
    let timing = GaitTiming::new(1.5, 0.5).expect("fixed timing is valid");
    let omega = (9.81f64).sqrt();
    let policy = StepAdjustPolicy {
        compliance_margin: margin.max(0.0),
        ..StepAdjustPolicy::default()
    };
    adjust_step(dcm_offset, 0.0, t, &timing, omega, &policy, 0, nominal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_columns_line_up() {
        let sim = simulate_impl("diagonal_walk", "steps = 1").unwrap();
        let n = sim.time().len();
        assert_eq!(n, 200);
        for axis in 0..2 {
            assert_eq!(sim.zmp_true(axis).len(), n);
            assert_eq!(sim.zmp_hi(axis).len(), n);
        }
        assert!(sim.summary().starts_with("diagonal_walk"));
    }

    #[test]
    fn unknown_scenario_is_an_error() {
        assert!(simulate_impl("nope", "").is_err());
        assert!(simulate_impl("diagonal_walk", "t_s = -1").is_err());
    }

    #[test]
    fn vertical_profile_climbs_one_rise_per_step() {
        let v = vertical_profile_impl(0.1, 0.0135, 0.00135, 3, 0.02).unwrap();
        assert_eq!(v.len(), 3 * 300);
        // Start of step 2 sits two rises up.
        let z = v[3 * 200 + 1];
        assert!((z - 1.2).abs() < 1e-12);
        assert!(v.chunks(3).all(|c| c[2] > 2.5 && c[2] < 4.0));
    }

    #[test]
    fn step_sweep_is_monotone_with_a_dead_band() {
        let steps: Vec<f64> = (0..=400).map(|k| adjusted_step(-0.2 + 0.001 * k as f64, 1.0, 0.2, 0.02)).collect();
        assert!(steps.windows(2).all(|w| w[1] >= w[0]));
        assert!(steps.iter().all(|s| s.abs() <= 0.4));
        assert!(steps.iter().filter(|&&s| s == 0.2).count() > 1);
    }
}
