//! Dense strictly convex QP with inequality constraints:
//!
//! ```text
//!     minimize    1/2 z' H z + g' z
//!     subject to  A z <= b
//! ```
//!
//! Solved with the Goldfarb-Idnani dual active-set method. The problems
//! produced by the planner have a handful of variables and on the order of a
//! hundred rows, so the projections are recomputed from scratch at every
//! iteration instead of being updated by rank-one modifications.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const FEASIBILITY_TOL: f64 = 1e-8;
pub const KKT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QpProblem {
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.g.dot(z)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "QP Hessian",
                expected: n,
                found: self.h.nrows(),
            });
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(Error::DimensionMismatch {
                context: "QP constraint matrix",
                expected: self.b.len(),
                found: self.a.nrows(),
            });
        }
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !finite(self.h.as_slice()) || !finite(self.g.as_slice()) || !finite(self.a.as_slice()) || !finite(self.b.as_slice()) {
            return Err(Error::Numerical("QP data contains non-finite entries".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Multipliers for every constraint row, zero off the active set.
    pub multipliers: DVector<f64>,
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
}

pub fn solve(p: &QpProblem, max_iter: usize) -> Result<QpSolution> {
    p.validate()?;
    let chol = Cholesky::new(p.h.clone())
        .ok_or_else(|| Error::Numerical("QP Hessian is not positive definite".into()))?;
    let mut solver = DualActiveSet::new(p, chol);
    let status = solver.run(max_iter);
    let iterations = solver.iterations;
    let (mut z, mut active, mut mult) = (solver.z, solver.active, solver.mult);

    if status == QpStatus::Optimal {
        if let Some((zp, mp)) = polish(p, &active) {
            if mp.iter().all(|&m| m >= -KKT_TOL) {
                z = zp;
                mult = mp;
            }
        }
        // Drop rows whose multiplier vanished so the reported set is minimal.
        let keep: Vec<bool> = mult.iter().map(|&m| m > 0.0).collect();
        let mut k = 0;
        active.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        mult.retain(|&m| m > 0.0);
    }

    let mut multipliers = DVector::zeros(p.n_constraints());
    for (&row, &m) in active.iter().zip(&mult) {
        multipliers[row] = m.max(0.0);
    }
    let kkt_residual = kkt_residual(p, &z, &multipliers);
    Ok(QpSolution {
        z,
        multipliers,
        active_set: active,
        kkt_residual,
        iterations,
        status,
    })
}

/// Largest violation among stationarity, primal feasibility, dual
/// feasibility and complementarity.
pub fn kkt_residual(p: &QpProblem, z: &DVector<f64>, multipliers: &DVector<f64>) -> f64 {
    let stationarity = (&p.h * z + &p.g + p.a.transpose() * multipliers).amax();
    let slack = &p.a * z - &p.b;
    let primal = slack.iter().fold(0.0f64, |acc, s| acc.max(*s));
    let dual = multipliers.iter().fold(0.0f64, |acc, m| acc.max(-m));
    let complementarity = slack
        .iter()
        .zip(multipliers.iter())
        .fold(0.0f64, |acc, (s, m)| acc.max((s * m).abs()));
    stationarity.max(primal).max(dual).max(complementarity)
}

/// Re-solve the equality-constrained KKT system on the final working set.
fn polish(p: &QpProblem, active: &[usize]) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = p.dim();
    let q = active.len();
    let mut kkt = DMatrix::zeros(n + q, n + q);
    let mut rhs = DVector::zeros(n + q);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
    for i in 0..n {
        rhs[i] = -p.g[i];
    }
    for (k, &row) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + k, j)] = p.a[(row, j)];
            kkt[(j, n + k)] = p.a[(row, j)];
        }
        rhs[n + k] = p.b[row];
    }
    let sol = kkt.lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let z = sol.rows(0, n).into_owned();
    let mult = sol.rows(n, q).iter().copied().collect();
    Some((z, mult))
}

struct DualActiveSet<'a> {
    p: &'a QpProblem,
    chol: Cholesky<f64, Dyn>,
    z: DVector<f64>,
    active: Vec<usize>,
    mult: Vec<f64>,
    iterations: usize,
}

impl<'a> DualActiveSet<'a> {
    fn new(p: &'a QpProblem, chol: Cholesky<f64, Dyn>) -> Self {
        let z = -chol.solve(&p.g);
        Self {
            p,
            chol,
            z,
            active: Vec::new(),
            mult: Vec::new(),
            iterations: 0,
        }
    }

    /// `b - a_i z`; negative when row `i` is violated.
    fn slack(&self, row: usize) -> f64 {
        self.p.b[row] - self.p.a.row(row).dot(&self.z.transpose())
    }

    fn most_violated(&self) -> Option<usize> {
        let mut worst = None;
        let mut worst_val = 0.0;
        for row in 0..self.p.n_constraints() {
            if self.active.contains(&row) {
                continue;
            }
            let norm = self.p.a.row(row).norm().max(f64::MIN_POSITIVE);
            let scaled = self.slack(row) / norm;
            let tol = 1e-12 * (1.0 + self.p.b[row].abs() / norm);
            if scaled < -tol && scaled < worst_val {
                worst_val = scaled;
                worst = Some(row);
            }
        }
        worst
    }

    /// Normal of row `i` in the `n' z >= b'` convention of the method.
    fn normal(&self, row: usize) -> DVector<f64> {
        -self.p.a.row(row).transpose()
    }

    /// Primal direction `z` and dual direction `r` for adding `n_plus`.
    fn directions(&self, n_plus: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let hinv_n = self.chol.solve(n_plus);
        let q = self.active.len();
        if q == 0 {
            return (hinv_n, DVector::zeros(0));
        }
        let n = self.p.dim();
        let mut normals = DMatrix::zeros(n, q);
        for (k, &row) in self.active.iter().enumerate() {
            normals.set_column(k, &self.normal(row));
        }
        let hinv_normals = self.chol.solve(&normals);
        let gram = normals.transpose() * &hinv_normals;
        let r = gram
            .lu()
            .solve(&(normals.transpose() * &hinv_n))
            .unwrap_or_else(|| DVector::zeros(q));
        let z = hinv_n - hinv_normals * &r;
        (z, r)
    }

    fn run(&mut self, max_iter: usize) -> QpStatus {
        loop {
            let Some(p_row) = self.most_violated() else {
                return QpStatus::Optimal;
            };
            let n_plus = self.normal(p_row);
            let mut u_plus = 0.0;
            loop {
                self.iterations += 1;
                if self.iterations > max_iter {
                    return QpStatus::MaxIter;
                }
                let (step, r) = self.directions(&n_plus);

                // Largest dual step keeping active multipliers non-negative.
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for (k, &rk) in r.iter().enumerate() {
                    if rk > 0.0 {
                        let ratio = self.mult[k] / rk;
                        if ratio < t1 {
                            t1 = ratio;
                            drop = Some(k);
                        }
                    }
                }

                // Full primal step onto the new constraint.
                let curvature = step.dot(&n_plus);
                let reference = n_plus.dot(&self.chol.solve(&n_plus));
                let t2 = if curvature > 1e-12 * reference {
                    -self.slack(p_row) / curvature
                } else {
                    f64::INFINITY
                };

                let t = t1.min(t2);
                if t.is_infinite() {
                    return QpStatus::Infeasible;
                }
                for (m, rk) in self.mult.iter_mut().zip(r.iter()) {
                    *m -= t * rk;
                }
                u_plus += t;

                if t2.is_finite() {
                    self.z += &step * t;
                }
                if t2.is_finite() && t2 <= t1 {
                    self.active.push(p_row);
                    self.mult.push(u_plus);
                    break;
                }
                let k = drop.expect("partial step always has a blocking constraint");
                self.active.remove(k);
                self.mult.remove(k);
            }
        }
    }
}

pub fn solve_default(p: &QpProblem) -> Result<QpSolution> {
    solve(p, DEFAULT_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    #[test]
    fn unconstrained_scalar() {
        let p = QpProblem::unconstrained(dmatrix![2.0], dvector![-2.0]);
        let s = solve_default(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-14);
        assert!(s.active_set.is_empty());
    }

    #[test]
    fn active_upper_bound() {
        let p = QpProblem {
            h: dmatrix![2.0],
            g: dvector![-2.0],
            a: dmatrix![1.0],
            b: dvector![0.5],
        };
        let s = solve_default(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 0.5).abs() < 1e-14);
        assert_eq!(s.active_set, vec![0]);
        assert!((s.multipliers[0] - 1.0).abs() < 1e-12);
    }

    /// Brute-force oracle on a grid of the feasible region.
    fn grid_minimum(p: &QpProblem, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=n {
            for j in 0..=n {
                let z = dvector![lo + i as f64 * step, lo + j as f64 * step];
                if (&p.a * &z - &p.b).iter().all(|s| *s <= 1e-12) {
                    let f = p.objective(&z);
                    if f < best.0 {
                        best = (f, z[0], z[1]);
                    }
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn simplex_corner() {
        let p = QpProblem {
            h: dmatrix![2.0, 0.0; 0.0, 2.0],
            g: dvector![-2.0, -2.0],
            a: dmatrix![1.0, 1.0; -1.0, 0.0; 0.0, -1.0],
            b: dvector![1.0, 0.0, 0.0],
        };
        let s = solve_default(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        let (gx, gy) = grid_minimum(&p, 0.0, 1.0, 1e-3);
        assert!((gx - 0.5).abs() < 1e-3 && (gy - 0.5).abs() < 1e-3);
        assert!((s.z[0] - 0.5).abs() < 1e-12 && (s.z[1] - 0.5).abs() < 1e-12);
        assert!(s.kkt_residual < KKT_TOL);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let p = QpProblem {
            h: dmatrix![2.0],
            g: dvector![0.0],
            a: dmatrix![1.0; -1.0],
            b: dvector![-1.0, -1.0],
        };
        let s = solve_default(&p).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_reports_status() {
        let p = QpProblem {
            h: dmatrix![2.0, 0.0; 0.0, 2.0],
            g: dvector![-2.0, -2.0],
            a: dmatrix![1.0, 0.0; 0.0, 1.0],
            b: dvector![0.0, 0.0],
        };
        let s = solve(&p, 1).unwrap();
        assert_eq!(s.status, QpStatus::MaxIter);
        assert!(s.z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_spd_hessian_is_an_error() {
        let p = QpProblem::unconstrained(dmatrix![1.0, 0.0; 0.0, -1.0], dvector![0.0, 0.0]);
        assert!(matches!(solve_default(&p), Err(Error::Numerical(_))));
    }

    #[test]
    fn degenerate_duplicate_rows() {
        let p = QpProblem {
            h: dmatrix![2.0, 0.0; 0.0, 2.0],
            g: dvector![-4.0, -4.0],
            a: dmatrix![1.0, 1.0; 2.0, 2.0; 1.0, 1.0],
            b: dvector![1.0, 2.0, 1.0],
        };
        let s = solve_default(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 0.5).abs() < 1e-10 && (s.z[1] - 0.5).abs() < 1e-10);
        assert!(s.kkt_residual < KKT_TOL);
    }

    /// Random strictly convex problem whose rows admit `z0` strictly.
    fn random_problem() -> impl Strategy<Value = (QpProblem, DVector<f64>)> {
        (1usize..=5, 1usize..=8).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-1.0..1.0f64, n * n),
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(-1.0..1.0f64, m * n),
                prop::collection::vec(-1.0..1.0f64, n),
                prop::collection::vec(0.01..0.5f64, m),
            )
                .prop_map(move |(hm, g, a, z0, gap)| {
                    let l = DMatrix::from_vec(n, n, hm);
                    let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.2;
                    let a = DMatrix::from_row_slice(m, n, &a);
                    let z0 = DVector::from_vec(z0);
                    let b = &a * &z0 + DVector::from_vec(gap);
                    (
                        QpProblem {
                            h,
                            g: DVector::from_vec(g),
                            a,
                            b,
                        },
                        z0,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn optimal_feasible_and_no_worse_than_interior((p, z0) in random_problem()) {
            let s = solve_default(&p).unwrap();
            prop_assert_eq!(s.status, QpStatus::Optimal);
            prop_assert!(s.kkt_residual <= KKT_TOL);
            let viol = (&p.a * &s.z - &p.b).max();
            prop_assert!(viol <= FEASIBILITY_TOL);
            prop_assert!(p.objective(&s.z) <= p.objective(&z0) + 1e-9);
            prop_assert!(s.multipliers.min() >= -1e-12);
        }

        #[test]
        fn row_scaling_does_not_change_the_solution(
            (p, _z0) in random_problem(),
            scale in prop::collection::vec(0.1..10.0f64, 8),
        ) {
            let mut q = p.clone();
            for i in 0..q.a.nrows() {
                q.a.row_mut(i).scale_mut(scale[i]);
                q.b[i] *= scale[i];
            }
            let (s, t) = (solve_default(&p).unwrap(), solve_default(&q).unwrap());
            prop_assert!((&s.z - &t.z).amax() < 1e-8);
        }

        #[test]
        fn dropping_inactive_rows_does_not_change_the_solution((p, _z0) in random_problem()) {
            let s = solve_default(&p).unwrap();
            let slack = &p.b - &p.a * &s.z;
            let keep: Vec<usize> = (0..p.n_constraints()).filter(|&i| slack[i] < 1e-6).collect();
            let q = QpProblem {
                h: p.h.clone(),
                g: p.g.clone(),
                a: p.a.select_rows(keep.iter()),
                b: p.b.select_rows(keep.iter()),
            };
            let t = solve_default(&q).unwrap();
            prop_assert!((&s.z - &t.z).amax() < 1e-8);
        }
    }
}
