//! Condensed output prediction over a receding horizon.
//!
//! Inputs are parameterized incrementally: `u(j) = u(j-1) + du(j)` with
//! `du(j) = 0` for `j >= nc`, so the last free move is held to the end of
//! the prediction window.

use nalgebra::{DMatrix, DVector, Matrix3, RowVector3, Vector3};

use crate::error::{Error, Result};
use crate::model::{AxisState, DiscreteModel};

/// Prediction (`np`) and control (`nc`) horizon lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HorizonDims {
    pub np: usize,
    pub nc: usize,
}

impl HorizonDims {
    pub fn new(np: usize, nc: usize) -> Result<Self> {
        if nc == 0 || nc > np {
            return Err(Error::invalid(
                "horizon",
                format!("need 1 <= nc <= np, got np = {np}, nc = {nc}"),
            ));
        }
        Ok(Self { np, nc })
    }
}

/// Time-invariant pair `Y = F x + Phi U` over absolute inputs.
#[derive(Debug, Clone)]
pub struct LtiPrediction {
    pub f: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

impl LtiPrediction {
    /// Outputs `y(1..=np)` for absolute inputs `u(0..nc)`, the last held.
    pub fn predict(&self, x0: AxisState, inputs: &DVector<f64>) -> DVector<f64> {
        &self.f * x0.to_vector() + &self.phi * inputs
    }
}

/// Row `i` of `F` is `C A^(i+1)`; `Phi(i, j) = C A^(i-j) B` below the
/// diagonal. The last column collects the held input, so for `nc < np` it
/// sums `C A^m B` over every sample from `nc - 1` on.
pub fn build_lti(model: &DiscreteModel, dims: HorizonDims) -> LtiPrediction {
    let c = model.output_row();
    let mut f = DMatrix::zeros(dims.np, 3);
    let mut phi = DMatrix::zeros(dims.np, dims.nc);

    // markov[m] = C A^m B
    let mut markov = Vec::with_capacity(dims.np);
    let mut a_pow = Matrix3::identity();
    for i in 0..dims.np {
        markov.push((c * a_pow * model.b)[0]);
        a_pow *= model.a;
        f.row_mut(i).copy_from(&(c * a_pow));
    }
    for i in 0..dims.np {
        for j in 0..dims.nc.min(i + 1) {
            phi[(i, j)] = if j + 1 == dims.nc {
                (j..=i).map(|k| markov[i - k]).sum()
            } else {
                markov[i - j]
            };
        }
    }
    LtiPrediction { f, phi }
}

/// Time-varying triple `Y = Sx x(0) + Su1 u(-1) + Su dU`.
#[derive(Debug, Clone)]
pub struct TvPrediction {
    pub sx: DMatrix<f64>,
    pub su1: DVector<f64>,
    pub su: DMatrix<f64>,
}

impl TvPrediction {
    pub fn dims(&self) -> HorizonDims {
        HorizonDims {
            np: self.su.nrows(),
            nc: self.su.ncols(),
        }
    }

    /// Free response: outputs with every increment zero.
    pub fn free_response(&self, x0: AxisState, u_prev: f64) -> DVector<f64> {
        &self.sx * x0.to_vector() + &self.su1 * u_prev
    }

    pub fn predict(&self, x0: AxisState, u_prev: f64, du: &DVector<f64>) -> DVector<f64> {
        self.free_response(x0, u_prev) + &self.su * du
    }
}

/// `models[i]` carries the transition `x(i) -> x(i+1)` and its `omega`
/// defines the output row applied to `x(i+1)`.
pub fn build_tv(models: &[DiscreteModel], dims: HorizonDims) -> Result<TvPrediction> {
    if models.len() != dims.np {
        return Err(Error::DimensionMismatch {
            context: "time-varying prediction models",
            expected: dims.np,
            found: models.len(),
        });
    }
    let mut sx = DMatrix::zeros(dims.np, 3);
    let mut su1 = DVector::zeros(dims.np);
    let mut su = DMatrix::zeros(dims.np, dims.nc);

    // Accumulated state transition and input responses, propagated one
    // sample at a time.
    let mut transition = Matrix3::identity();
    let mut prev_input = Vector3::zeros();
    let mut moves = vec![Vector3::zeros(); dims.nc];

    for (i, m) in models.iter().enumerate() {
        transition = m.a * transition;
        prev_input = m.a * prev_input + m.b;
        for (j, w) in moves.iter_mut().enumerate() {
            *w = m.a * *w;
            if i >= j {
                *w += m.b;
            }
        }
        let c: RowVector3<f64> = m.output_row();
        sx.row_mut(i).copy_from(&(c * transition));
        su1[i] = c.dot(&prev_input.transpose());
        for (j, w) in moves.iter().enumerate() {
            su[(i, j)] = c.dot(&w.transpose());
        }
    }
    Ok(TvPrediction { sx, su1, su })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{discretize, zmp_of_state};

    const W: f64 = 3.132092;

    /// Sequential rollout of the incremental-input model, independent of
    /// the condensed matrices.
    fn rollout(models: &[DiscreteModel], x0: AxisState, u_prev: f64, du: &[f64]) -> Vec<f64> {
        let mut x = x0;
        let mut u = u_prev;
        models
            .iter()
            .enumerate()
            .map(|(j, m)| {
                u += du.get(j).copied().unwrap_or(0.0);
                x = m.propagate(x, u);
                zmp_of_state(x, m.omega)
            })
            .collect()
    }

    #[test]
    fn horizon_dims_validation() {
        assert!(HorizonDims::new(3, 0).is_err());
        assert!(HorizonDims::new(3, 4).is_err());
        assert!(HorizonDims::new(3, 3).is_ok());
    }

    #[test]
    fn lti_single_sample() {
        let m = discretize(0.02, W).unwrap();
        let p = build_lti(&m, HorizonDims::new(1, 1).unwrap());
        let c = m.output_row();
        assert_eq!(p.f.row(0).clone_owned(), c * m.a);
        assert_eq!(p.phi[(0, 0)], (c * m.b)[0]);
    }

    #[test]
    fn lti_matches_rollout_with_held_input() {
        let m = discretize(0.02, W).unwrap();
        let p = build_lti(&m, HorizonDims::new(3, 2).unwrap());
        let x0 = AxisState::new(0.05, -0.1, 0.3);
        let y = p.predict(x0, &DVector::from_vec(vec![0.5, -0.2]));

        let mut x = x0;
        for (i, u) in [0.5, -0.2, -0.2].into_iter().enumerate() {
            x = m.propagate(x, u);
            assert!((y[i] - zmp_of_state(x, W)).abs() < 1e-12);
        }
        assert_eq!(p.phi[(0, 1)], 0.0);
    }

    #[test]
    fn zero_state_zero_input() {
        let m = discretize(0.02, W).unwrap();
        let p = build_lti(&m, HorizonDims::new(10, 3).unwrap());
        let y = p.predict(AxisState::default(), &DVector::zeros(3));
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tv_degenerates_to_lti() {
        let m = discretize(0.02, W).unwrap();
        let dims = HorizonDims::new(8, 3).unwrap();
        let lti = build_lti(&m, dims);
        let tv = build_tv(&vec![m; 8], dims).unwrap();
        let x0 = AxisState::new(0.1, 0.2, -0.3);
        let du = DVector::from_vec(vec![0.4, -0.1, 0.25]);
        // u(-1) = 0 so absolute inputs are the running sums of the increments.
        let absolute = DVector::from_vec(vec![0.4, 0.3, 0.55]);
        let a = lti.predict(x0, &absolute);
        let b = tv.predict(x0, 0.0, &du);
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn tv_stair_profile_matches_rollout() {
        // Frequencies from a COM that sits 1.0 m then 1.1 m above its support.
        let omegas = [W, W, (9.81f64 / 1.1).sqrt(), (9.81f64 / 1.1).sqrt()];
        let models: Vec<_> = omegas.iter().map(|w| discretize(0.02, *w).unwrap()).collect();
        let tv = build_tv(&models, HorizonDims::new(4, 2).unwrap()).unwrap();
        let x0 = AxisState::new(0.12, -0.4, 0.9);
        let du = [0.7, -1.3];
        let y = tv.predict(x0, 0.25, &DVector::from_column_slice(&du));
        let oracle = rollout(&models, x0, 0.25, &du);
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tv_constant_previous_input() {
        let models: Vec<_> = (0..6).map(|i| discretize(0.02, 2.8 + 0.1 * i as f64).unwrap()).collect();
        let tv = build_tv(&models, HorizonDims::new(6, 2).unwrap()).unwrap();
        let x0 = AxisState::new(0.0, 0.1, 0.0);
        let y = tv.predict(x0, 0.3, &DVector::zeros(2));
        let oracle = rollout(&models, x0, 0.3, &[]);
        for (a, b) in y.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_rejects_wrong_model_count() {
        let m = discretize(0.02, W).unwrap();
        let err = build_tv(&[m; 3], HorizonDims::new(4, 2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, found: 3, .. }));
    }

    #[test]
    fn su_is_causal() {
        let models: Vec<_> = (0..7).map(|i| discretize(0.02, 2.6 + 0.2 * i as f64).unwrap()).collect();
        let tv = build_tv(&models, HorizonDims::new(7, 4).unwrap()).unwrap();
        for i in 0..7 {
            for j in (i + 1)..4 {
                assert_eq!(tv.su[(i, j)], 0.0);
            }
        }
    }
}
