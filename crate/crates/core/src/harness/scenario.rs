//! Scenario definitions and the `key = value` config format.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::{default_process_noise, DEFAULT_MEASUREMENT_VAR};
use crate::planner::{
    ControllerConfig, GaitSchedule, GaitTiming, InputLimits, Reach, StepAdjustPolicy, VerticalParams, WalkPattern,
};
use crate::prediction::HorizonDims;
use crate::qp::DEFAULT_MAX_ITER;
use crate::sim::{Disturbance, NoiseSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub step_width: f64,
    pub step_length: f64,
    pub t_ss: f64,
    pub t_ds: f64,
    pub foot_length: f64,
    pub z_c0: f64,
    pub a_ss: f64,
    pub a_ds: f64,
    /// Stair rise per step; zero on flat ground.
    pub delta_z_c: f64,
    pub t_s: f64,
    pub n_p: usize,
    pub n_c: usize,
    pub steps: usize,
    /// Lateral offset of each foot from the centerline.
    pub half_separation: f64,
    /// Lateral advance of the centerline per step.
    pub lateral_drift: f64,
    pub mass: f64,
    pub noise_bound: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub disturbances: Vec<Disturbance>,
    /// True COM height minus the height the planner assumes.
    pub plant_height_offset: f64,
    pub jerk_max: f64,
    pub jerk_rate_max: f64,
    pub rho: f64,
    pub slack_weight: f64,
    pub compliance_margin: f64,
    pub reach_x: f64,
    pub reach_y: f64,
    pub lateral_keepout: f64,
    pub noise_gate: f64,
    pub kf_q: [f64; 3],
    pub kf_r: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let q = default_process_noise();
        Self {
            name: "diagonal_walk".into(),
            step_width: 0.1,
            step_length: 0.2,
            t_ss: 1.5,
            t_ds: 0.5,
            foot_length: 0.075,
            z_c0: 1.0,
            a_ss: 0.0135,
            a_ds: 0.00135,
            delta_z_c: 0.0,
            t_s: 0.02,
            n_p: 50,
            n_c: 2,
            steps: 5,
            half_separation: 0.05,
            lateral_drift: 0.05,
            mass: 100.0,
            noise_bound: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            disturbances: Vec::new(),
            plant_height_offset: 0.0,
            jerk_max: 1.5,
            jerk_rate_max: 0.1,
            rho: 1e-6,
            slack_weight: 1e6,
            compliance_margin: 0.02,
            reach_x: 0.4,
            reach_y: 0.3,
            lateral_keepout: 0.05,
            noise_gate: 3.0,
            kf_q: [q[(0, 0)], q[(1, 1)], q[(2, 2)]],
            kf_r: DEFAULT_MEASUREMENT_VAR,
        }
    }
}

impl ScenarioConfig {
    pub fn timing(&self) -> Result<GaitTiming> {
        GaitTiming::new(self.t_ss, self.t_ds)
    }

    pub fn vertical(&self) -> VerticalParams {
        VerticalParams {
            z_c0: self.z_c0,
            a_ss: self.a_ss,
            a_ds: self.a_ds,
            delta_z_c: self.delta_z_c,
        }
    }

    pub fn pattern(&self) -> WalkPattern {
        WalkPattern {
            step_length: self.step_length,
            half_separation: self.half_separation,
            lateral_drift: self.lateral_drift,
            rise: self.delta_z_c,
        }
    }

    pub fn schedule(&self) -> Result<GaitSchedule> {
        GaitSchedule::walk(&self.pattern(), self.steps + 1, self.foot_length)
    }

    pub fn controller(&self) -> Result<ControllerConfig> {
        Ok(ControllerConfig {
            dt: self.t_s,
            dims: HorizonDims::new(self.n_p, self.n_c)?,
            rho: self.rho,
            limits: InputLimits {
                u_min: -self.jerk_max,
                u_max: self.jerk_max,
                du_min: -self.jerk_rate_max,
                du_max: self.jerk_rate_max,
            },
            slack_weight: self.slack_weight,
            max_iter: DEFAULT_MAX_ITER,
            policy: StepAdjustPolicy {
                compliance_margin: self.compliance_margin,
                reach_x: Reach {
                    min: -self.reach_x,
                    max: self.reach_x,
                },
                reach_y: self.reach_y,
                lateral_keepout: self.lateral_keepout,
                noise_gate: self.noise_gate,
            },
        })
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            bound: self.noise_bound,
            sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    /// Number of control cycles: every walking step plus one settling step.
    pub fn cycles(&self) -> usize {
        ((self.steps + 1) as f64 * (self.t_ss + self.t_ds) / self.t_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("steps", "need at least one step"));
        }
        if !(self.t_s > 0.0) {
            return Err(Error::invalid("t_s", "sample time must be positive"));
        }
        if !(self.jerk_max > 0.0) || !(self.jerk_rate_max > 0.0) {
            return Err(Error::invalid("jerk_max", "jerk and jerk-rate bounds must be positive"));
        }
        if !(self.compliance_margin >= 0.0) || !(self.noise_gate >= 0.0) {
            return Err(Error::invalid("compliance_margin", "dead band terms must be non-negative"));
        }
        if !(self.reach_y > self.lateral_keepout) || !(self.reach_x > 0.0) {
            return Err(Error::invalid("reach", "reachable area must be non-empty"));
        }
        if !(self.z_c0 + self.plant_height_offset > 0.0) {
            return Err(Error::invalid("plant_height_offset", "true COM height must stay positive"));
        }
        self.timing()?;
        self.vertical().validate()?;
        self.controller()?;
        Ok(())
    }

    /// Set one field from its config key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num(v: &str) -> std::result::Result<f64, String> {
            v.trim().parse::<f64>().map_err(|e| format!("`{v}` is not a number: {e}"))
        }
        fn count(v: &str) -> std::result::Result<usize, String> {
            v.trim().parse::<usize>().map_err(|e| format!("`{v}` is not a count: {e}"))
        }
        let v = value.trim();
        match key.trim() {
            "name" => self.name = v.to_string(),
            "step_width" => {
                self.step_width = num(v)?;
                self.half_separation = self.step_width / 2.0;
                self.lateral_drift = self.step_width / 2.0;
            }
            "step_length" => self.step_length = num(v)?,
            "t_ss" => self.t_ss = num(v)?,
            "t_ds" => self.t_ds = num(v)?,
            "foot_length" => self.foot_length = num(v)?,
            "z_c0" => self.z_c0 = num(v)?,
            "a_ss" => self.a_ss = num(v)?,
            "a_ds" => self.a_ds = num(v)?,
            "delta_z_c" => self.delta_z_c = num(v)?,
            "t_s" => self.t_s = num(v)?,
            "n_p" => self.n_p = count(v)?,
            "n_c" => self.n_c = count(v)?,
            "steps" => self.steps = count(v)?,
            "half_separation" => self.half_separation = num(v)?,
            "lateral_drift" => self.lateral_drift = num(v)?,
            "mass" => self.mass = num(v)?,
            "noise_bound" => self.noise_bound = num(v)?,
            "noise_sigma" => self.noise_sigma = num(v)?,
            "seed" => self.seed = v.parse().map_err(|e| format!("`{v}` is not a seed: {e}"))?,
            "disturbance" => {
                let parts: Vec<f64> = v.split(',').map(num).collect::<std::result::Result<_, _>>()?;
                let [fx, fy, start, duration] = parts[..] else {
                    return Err("disturbance needs `fx, fy, start, duration`".into());
                };
                let d = Disturbance::new(fx, fy, start, duration).map_err(|e| e.to_string())?;
                self.disturbances.push(d);
            }
            "plant_height_offset" => self.plant_height_offset = num(v)?,
            "jerk_max" => self.jerk_max = num(v)?,
            "jerk_rate_max" => self.jerk_rate_max = num(v)?,
            "rho" => self.rho = num(v)?,
            "slack_weight" => self.slack_weight = num(v)?,
            "compliance_margin" => self.compliance_margin = num(v)?,
            "reach_x" => self.reach_x = num(v)?,
            "reach_y" => self.reach_y = num(v)?,
            "lateral_keepout" => self.lateral_keepout = num(v)?,
            "noise_gate" => self.noise_gate = num(v)?,
            "kf_q_pos" => self.kf_q[0] = num(v)?,
            "kf_q_vel" => self.kf_q[1] = num(v)?,
            "kf_q_acc" => self.kf_q[2] = num(v)?,
            "kf_r" => self.kf_r = num(v)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Apply `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            self.set(key, value).map_err(|message| Error::Config { line: i + 1, message })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("name", self.name.clone());
        put("step_width", self.step_width.to_string());
        put("step_length", self.step_length.to_string());
        put("t_ss", self.t_ss.to_string());
        put("t_ds", self.t_ds.to_string());
        put("foot_length", self.foot_length.to_string());
        put("z_c0", self.z_c0.to_string());
        put("a_ss", self.a_ss.to_string());
        put("a_ds", self.a_ds.to_string());
        put("delta_z_c", self.delta_z_c.to_string());
        put("t_s", self.t_s.to_string());
        put("n_p", self.n_p.to_string());
        put("n_c", self.n_c.to_string());
        put("steps", self.steps.to_string());
        put("half_separation", self.half_separation.to_string());
        put("lateral_drift", self.lateral_drift.to_string());
        put("mass", self.mass.to_string());
        put("noise_bound", self.noise_bound.to_string());
        put("noise_sigma", self.noise_sigma.to_string());
        put("seed", self.seed.to_string());
        for d in &self.disturbances {
            put(
                "disturbance",
                format!("{}, {}, {}, {}", d.force[0], d.force[1], d.start, d.duration),
            );
        }
        put("plant_height_offset", self.plant_height_offset.to_string());
        put("jerk_max", self.jerk_max.to_string());
        put("jerk_rate_max", self.jerk_rate_max.to_string());
        put("rho", self.rho.to_string());
        put("slack_weight", self.slack_weight.to_string());
        put("compliance_margin", self.compliance_margin.to_string());
        put("reach_x", self.reach_x.to_string());
        put("reach_y", self.reach_y.to_string());
        put("lateral_keepout", self.lateral_keepout.to_string());
        put("noise_gate", self.noise_gate.to_string());
        put("kf_q_pos", self.kf_q[0].to_string());
        put("kf_q_vel", self.kf_q[1].to_string());
        put("kf_q_acc", self.kf_q[2].to_string());
        put("kf_r", self.kf_r.to_string());
        s
    }
}

/// The measurement noise used by the robustness studies.
pub const NOISE_BOUND: f64 = 0.02;
pub const PUSH_TIME: f64 = 2.2;
pub const PUSH_DURATION: f64 = 0.01;

fn noisy(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.noise_bound = NOISE_BOUND;
    cfg.noise_sigma = NOISE_BOUND / 2.0;
    cfg
}

/// Named scenario with a one-line description.
#[derive(Debug, Clone)]
pub struct Builtin {
    pub config: ScenarioConfig,
    pub description: &'static str,
}

pub fn builtin_scenarios() -> Vec<Builtin> {
    let base = ScenarioConfig::default();
    let named = |name: &str, f: &dyn Fn(&mut ScenarioConfig)| {
        let mut c = base.clone();
        c.name = name.to_string();
        f(&mut c);
        c
    };
    let mut out = vec![
        Builtin {
            config: named("diagonal_walk", &|_| {}),
            description: "five diagonal steps on flat ground",
        },
        Builtin {
            config: named("stair_climb", &|c| c.delta_z_c = 0.1),
            description: "five steps up stairs with a 0.1 m rise",
        },
        Builtin {
            config: noisy(named("noise_walk", &|_| {})),
            description: "diagonal walk with clipped Gaussian ZMP noise (+-0.02 m)",
        },
        Builtin {
            config: noisy(named("noise_stairs", &|c| c.delta_z_c = 0.1)),
            description: "stair climb with clipped Gaussian ZMP noise (+-0.02 m)",
        },
    ];
    for (name, offset) in [
        ("height_p01", 0.1),
        ("height_m01", -0.1),
        ("height_p02", 0.2),
        ("height_m02", -0.2),
    ] {
        out.push(Builtin {
            config: named(name, &|c| c.plant_height_offset = offset),
            description: "diagonal walk with a wrong COM height in the planner",
        });
    }
    for (name, force) in [
        ("push_p50", 50.0),
        ("push_m50", -50.0),
        ("push_p75", 75.0),
        ("push_m75", -75.0),
    ] {
        out.push(Builtin {
            config: noisy(named(name, &|c| {
                c.disturbances = vec![Disturbance::new(force, force, PUSH_TIME, PUSH_DURATION).unwrap()]
            })),
            description: "noisy diagonal walk pushed at the COM for 10 ms",
        });
    }
    out
}

pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    builtin_scenarios()
        .into_iter()
        .find(|b| b.config.name == name)
        .map(|b| b.config)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let c = ScenarioConfig::default();
        let table = [
            c.step_width,
            c.step_length,
            c.t_ss,
            c.t_ds,
            c.foot_length,
            c.z_c0,
            c.a_ss,
            c.a_ds,
            c.delta_z_c,
            c.t_s,
        ];
        assert_eq!(table, [0.1, 0.2, 1.5, 0.5, 0.075, 1.0, 0.0135, 0.00135, 0.0, 0.02]);
        assert_eq!((c.n_p, c.n_c, c.steps), (50, 2, 5));
        assert_eq!(c.cycles(), 600);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn named_builtins() {
        let push = builtin("push_p75").unwrap();
        assert_eq!(push.disturbances, vec![Disturbance::new(75.0, 75.0, 2.2, 0.01).unwrap()]);
        assert_eq!(push.noise_bound, 0.02);
        assert_eq!(builtin("height_m02").unwrap().plant_height_offset, -0.2);
        assert_eq!(builtin("noise_walk").unwrap().noise_bound, 0.02);
        assert_eq!(builtin("stair_climb").unwrap().delta_z_c, 0.1);
        assert!(matches!(builtin("moonwalk"), Err(Error::UnknownScenario(_))));
        let names: Vec<_> = builtin_scenarios().into_iter().map(|b| b.config.name).collect();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn text_round_trip() {
        let c = builtin("push_m50").unwrap();
        let back = ScenarioConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ScenarioConfig::parse("steps = 3\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = ScenarioConfig::parse("# comment\nt_ss = fast\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = ScenarioConfig::parse("wat = 1").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        assert!(ScenarioConfig::parse("steps = 0").is_err());
    }
}
