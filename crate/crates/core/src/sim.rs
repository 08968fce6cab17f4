//! Simulated plant: a point-mass triple integrator per horizontal axis,
//! pushed by external forces and observed through a noisy ZMP sensor.
//!
//! The stored acceleration is the part produced by the ground reaction
//! (the integral of the commanded jerk). External forces act directly on
//! the COM, so they change position and velocity but not the ZMP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{discretize, zmp_of_state, AxisState, JerkCommand};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub force: [f64; 2],
    pub start: f64,
    pub duration: f64,
}

impl Disturbance {
    pub fn new(fx: f64, fy: f64, start: f64, duration: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::invalid("duration", format!("must be positive, got {duration}")));
        }
        Ok(Self {
            force: [fx, fy],
            start,
            duration,
        })
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub axes: [AxisState; 2],
    pub mass: f64,
    pub time: f64,
}

impl PlantState {
    pub fn new(axes: [AxisState; 2], mass: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        Ok(Self { axes, mass, time: 0.0 })
    }

    /// ZMP implied by the plant's own pendulum frequency.
    pub fn zmp(&self, omega: f64) -> [f64; 2] {
        [zmp_of_state(self.axes[0], omega), zmp_of_state(self.axes[1], omega)]
    }

    /// Acceleration including external forces active at `t`.
    pub fn total_acceleration(&self, t: f64, disturbances: &[Disturbance]) -> [f64; 2] {
        let mut acc = [self.axes[0].acc, self.axes[1].acc];
        for d in disturbances.iter().filter(|d| d.is_active(t)) {
            for (a, f) in acc.iter_mut().zip(d.force) {
                *a += f / self.mass;
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.axes.iter().all(AxisState::is_finite)
    }
}

/// Advance by `dt` under constant jerk. A force active on part of
/// `[t, t + dt)` is integrated exactly over that overlap.
pub fn plant_step(p: &PlantState, jerk: [JerkCommand; 2], disturbances: &[Disturbance], dt: f64) -> Result<PlantState> {
    let model = discretize(dt, 1.0)?;
    let mut next = *p;
    for axis in 0..2 {
        next.axes[axis] = model.propagate(p.axes[axis], jerk[axis].0);
    }
    let (t0, t1) = (p.time, p.time + dt);
    for d in disturbances {
        let s = d.start.max(t0);
        let e = d.end().min(t1);
        if e <= s {
            continue;
        }
        // Offsets of the overlap from the end of the step.
        let (rs, re) = (t1 - s, t1 - e);
        for axis in 0..2 {
            let a = d.force[axis] / p.mass;
            next.axes[axis].vel += a * (e - s);
            next.axes[axis].pos += a * 0.5 * (rs * rs - re * re);
        }
    }
    next.time = t1;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Clipping bound of each sample.
    pub bound: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            bound: 0.0,
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Clipped Gaussian measurement noise, one independent stream per axis.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    spec: NoiseSpec,
    streams: [ChaCha8Rng; 2],
    normal: Option<Normal<f64>>,
}

impl NoiseSource {
    pub fn new(spec: NoiseSpec) -> Result<Self> {
        if !(spec.bound >= 0.0) || !(spec.sigma >= 0.0) {
            return Err(Error::invalid("noise", "bound and sigma must be non-negative"));
        }
        let stream = |axis: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(axis);
            rng
        };
        let normal = (spec.sigma > 0.0)
            .then(|| Normal::new(0.0, spec.sigma).map_err(|e| Error::invalid("sigma", e.to_string())))
            .transpose()?;
        Ok(Self {
            spec,
            streams: [stream(0), stream(1)],
            normal,
        })
    }

    pub fn sample(&mut self, axis: usize) -> f64 {
        match &self.normal {
            Some(n) if self.spec.bound > 0.0 => n.sample(&mut self.streams[axis]).clamp(-self.spec.bound, self.spec.bound),
            _ => 0.0,
        }
    }
}

/// Noisy ZMP reading, computed with the frequency the planner assumes.
pub fn measure(p: &PlantState, omega: f64, noise: &mut NoiseSource) -> [f64; 2] {
    let zmp = p.zmp(omega);
    [zmp[0] + noise.sample(0), zmp[1] + noise.sample(1)]
}
