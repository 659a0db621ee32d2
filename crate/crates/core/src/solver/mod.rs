//! Nominal, shrinkage and robust formulations of `max cᵀx, A x <= b, x >= 0`.
//!
//! The nominal and shrinkage models are plain LPs over `Ā` and `A*`. The
//! robust model requires `(āᵢ + δ)ᵀx <= bᵢ` for every `‖δ‖₂ <= γ`, i.e.
//! `āᵢᵀx + γ‖x‖₂ <= bᵢ`, a second-order cone program solved by a primal-dual
//! interior-point method or by outer linearization over the simplex core
//! (see [`solve_robust`]).

mod conic;
mod robust;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;
use simplex::{Outcome, Tableau};

pub use robust::{box_support_value, robust_support_value, solve_robust, RobustMethod, RobustOptions, IPM_GAP_TOL};

/// Absolute per-constraint feasibility tolerance of reported solutions.
pub const TOL_FEAS: f64 = 1e-7;
/// Relative optimality tolerance, checked through the duality gap.
pub const TOL_OPT: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem data: {0}")]
    InvalidData(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// `max costᵀx` s.t. `A x <= b`, `x >= 0`, and, when `robust_radius > 0`,
/// `aᵢᵀx + γ‖x‖₂ <= bᵢ` for every row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    a: DenseMatrix,
    b: Vec<f64>,
    cost: Vec<f64>,
    robust_radius: f64,
}

impl ConstrainedProblem {
    pub fn new(
        a: DenseMatrix,
        b: Vec<f64>,
        cost: Vec<f64>,
        robust_radius: f64,
    ) -> Result<Self, SolverError> {
        if b.len() != a.rows() {
            return Err(SolverError::Dimension(format!(
                "b has length {}, matrix has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if cost.len() != a.cols() {
            return Err(SolverError::Dimension(format!(
                "cost has length {}, matrix has {} columns",
                cost.len(),
                a.cols()
            )));
        }
        if b.iter().chain(&cost).any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidData("non-finite entry in b or cost".into()));
        }
        if !(robust_radius >= 0.0 && robust_radius.is_finite()) {
            return Err(SolverError::InvalidData(format!(
                "robust radius must be >= 0, got {robust_radius}"
            )));
        }
        Ok(Self {
            a,
            b,
            cost,
            robust_radius,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn robust_radius(&self) -> f64 {
        self.robust_radius
    }

    pub fn with_robust_radius(mut self, gamma: f64) -> Result<Self, SolverError> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(SolverError::InvalidData(format!(
                "robust radius must be >= 0, got {gamma}"
            )));
        }
        self.robust_radius = gamma;
        Ok(self)
    }

    /// Dispatches to [`solve_lp`] or [`solve_robust`] by the robust radius.
    pub fn solve(&self) -> Solution {
        if self.robust_radius > 0.0 {
            solve_robust(self, &RobustOptions::default()).expect("radius checked")
        } else {
            solve_lp(self).expect("radius checked")
        }
    }

    /// Largest violation of `A x <= b` (linear rows only).
    pub fn max_linear_violation(&self, x: &[f64]) -> f64 {
        self.a
            .row_iter()
            .zip(&self.b)
            .map(|(row, &bi)| crate::matrix::dot(row, x) - bi)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest violation of `aᵢᵀx + γ‖x‖₂ <= bᵢ`, with `γ` the problem's radius.
    pub fn max_robust_violation(&self, x: &[f64]) -> f64 {
        let gamma = self.robust_radius;
        self.a
            .row_iter()
            .zip(&self.b)
            .map(|(row, &bi)| robust_support_value(row, x, gamma) - bi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::IterationLimit => "IterationLimit",
        }
    }
}

impl From<Outcome> for SolveStatus {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Optimal => SolveStatus::Optimal,
            Outcome::Infeasible => SolveStatus::Infeasible,
            Outcome::Unbounded => SolveStatus::Unbounded,
            Outcome::IterationLimit => SolveStatus::IterationLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// Present iff `status` is `Optimal`.
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Simplex pivots, summed over all cutting-plane rounds.
    pub iterations: usize,
    pub cutting_planes_added: usize,
    /// Largest constraint violation at the last iterate (robust constraints
    /// when the radius is positive). Set for `Optimal` and `IterationLimit`.
    pub max_violation: Option<f64>,
}

impl Solution {
    pub(crate) fn failed(status: SolveStatus, iterations: usize, cuts: usize) -> Self {
        Self {
            status,
            x: None,
            objective: None,
            iterations,
            cutting_planes_added: cuts,
            max_violation: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves the pure LP (`robust_radius == 0`).
///
/// Optimal results are certified against the original data: `x >= −TOL_FEAS`,
/// `A x <= b + TOL_FEAS`, dual feasibility of the row prices, and a relative
/// duality gap below `TOL_OPT`. A failed certificate is reported as
/// `IterationLimit`.
pub fn solve_lp(problem: &ConstrainedProblem) -> Result<Solution, SolverError> {
    if problem.robust_radius != 0.0 {
        return Err(SolverError::Precondition(format!(
            "solve_lp needs robust_radius = 0, got {}",
            problem.robust_radius
        )));
    }
    let mut tableau = Tableau::new(problem.a.row_iter().collect(), &problem.b, &problem.cost);
    let outcome = tableau.solve();
    Ok(finish_lp(problem, &tableau, outcome, 0))
}

pub(crate) fn finish_lp(
    problem: &ConstrainedProblem,
    tableau: &Tableau,
    outcome: Outcome,
    cuts: usize,
) -> Solution {
    if outcome != Outcome::Optimal {
        return Solution::failed(outcome.into(), tableau.pivots, cuts);
    }
    let x = tableau.primal_values();
    let y = tableau.dual_values();
    if !certify(problem, tableau, &x, &y) {
        return Solution::failed(SolveStatus::IterationLimit, tableau.pivots, cuts);
    }
    let objective = crate::matrix::dot(&problem.cost, &x);
    let max_violation = problem.max_linear_violation(&x).max(0.0);
    Solution {
        status: SolveStatus::Optimal,
        x: Some(x),
        objective: Some(objective),
        iterations: tableau.pivots,
        cutting_planes_added: cuts,
        max_violation: Some(max_violation),
    }
}

/// Certificate for the LP held in the tableau (including appended rows).
fn certify(problem: &ConstrainedProblem, tableau: &Tableau, x: &[f64], y: &[f64]) -> bool {
    if x.iter().any(|&v| v < -TOL_FEAS) || y.iter().any(|&v| v < -TOL_FEAS) {
        return false;
    }
    let (rows, rhs) = tableau.original_system();
    let p = problem.cost.len();
    let mut aty = vec![0.0; p];
    let mut dual_obj = 0.0;
    for ((row, &bi), &yi) in rows.iter().zip(rhs).zip(y) {
        let lhs = crate::matrix::dot(&row[..p], x);
        if lhs > bi + TOL_FEAS {
            return false;
        }
        if yi != 0.0 {
            for (acc, a) in aty.iter_mut().zip(&row[..p]) {
                *acc += yi * a;
            }
            dual_obj += yi * bi;
        }
    }
    let cost_scale = problem.cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    if aty
        .iter()
        .zip(&problem.cost)
        .any(|(s, c)| s - c < -TOL_FEAS * cost_scale)
    {
        return false;
    }
    let primal_obj = crate::matrix::dot(&problem.cost, x);
    (primal_obj - dual_obj).abs() <= TOL_OPT * primal_obj.abs().max(1.0)
}

/// Nominal model: the sample mean plugged in for the unknown matrix.
pub fn build_nominal(
    a_bar: DenseMatrix,
    b: Vec<f64>,
    cost: Vec<f64>,
) -> Result<ConstrainedProblem, SolverError> {
    ConstrainedProblem::new(a_bar, b, cost, 0.0)
}

/// Shrinkage model: the shrunk matrix `A* = α̂Ā + β̂U` in the constraints.
pub fn build_shrinkage(
    a_star: DenseMatrix,
    b: Vec<f64>,
    cost: Vec<f64>,
) -> Result<ConstrainedProblem, SolverError> {
    ConstrainedProblem::new(a_star, b, cost, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(a: &[&[f64]], b: &[f64], c: &[f64]) -> ConstrainedProblem {
        let rows: Vec<Vec<f64>> = a.iter().map(|r| r.to_vec()).collect();
        ConstrainedProblem::new(DenseMatrix::from_rows(&rows).unwrap(), b.to_vec(), c.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn trivial_lps() {
        let s = solve_lp(&lp(&[&[1.0]], &[5.0], &[1.0])).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.x.as_deref(), Some(&[5.0][..]));
        assert_eq!(s.objective, Some(5.0));
        let s = solve_lp(&lp(&[&[1.0]], &[-1.0], &[1.0])).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        assert!(s.x.is_none() && s.objective.is_none());
    }

    /// Enumerates every basic solution of `A x + s = b` with `x, s >= 0`.
    fn vertex_enumeration_optimum(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
        let m = a.len();
        let p = c.len();
        let n = p + m;
        let col = |j: usize, i: usize| if j < p { a[i][j] } else if j - p == i { 1.0 } else { 0.0 };
        let mut best = f64::NEG_INFINITY;
        let mut subset = vec![0usize; m];
        fn next(subset: &mut [usize], n: usize) -> bool {
            let k = subset.len();
            for i in (0..k).rev() {
                if subset[i] < n - k + i {
                    subset[i] += 1;
                    for j in i + 1..k {
                        subset[j] = subset[j - 1] + 1;
                    }
                    return true;
                }
            }
            false
        }
        for (i, s) in subset.iter_mut().enumerate() {
            *s = i;
        }
        loop {
            // Solve the m x m system by Gaussian elimination.
            let mut mat: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut r: Vec<f64> = subset.iter().map(|&j| col(j, i)).collect();
                    r.push(b[i]);
                    r
                })
                .collect();
            let mut ok = true;
            for k in 0..m {
                let piv = (k..m).max_by(|&x, &y| mat[x][k].abs().total_cmp(&mat[y][k].abs())).unwrap();
                if mat[piv][k].abs() < 1e-12 {
                    ok = false;
                    break;
                }
                mat.swap(k, piv);
                for i in 0..m {
                    if i != k {
                        let f = mat[i][k] / mat[k][k];
                        for jj in k..=m {
                            mat[i][jj] -= f * mat[k][jj];
                        }
                    }
                }
            }
            if ok {
                let vals: Vec<f64> = (0..m).map(|k| mat[k][m] / mat[k][k]).collect();
                if vals.iter().all(|&v| v >= -1e-12) {
                    let obj: f64 = subset
                        .iter()
                        .zip(&vals)
                        .filter(|(&j, _)| j < p)
                        .map(|(&j, &v)| c[j] * v)
                        .sum();
                    best = best.max(obj);
                }
            }
            if !next(&mut subset, n) {
                break;
            }
        }
        best
    }

    #[test]
    fn two_variable_lp_matches_vertex_enumeration() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 2.0]];
        let want = vertex_enumeration_optimum(&a, &[1.0, 1.5], &[1.0, 1.0]);
        assert!((want - 1.0).abs() < 1e-12);
        let s = solve_lp(&lp(&[&[1.0, 1.0], &[1.0, 2.0]], &[1.0, 1.5], &[1.0, 1.0])).unwrap();
        assert!((s.objective.unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use crate::scenario::RngStream;
        use rand::Rng;
        let mut rng = RngStream::new(5, 5);
        for _ in 0..40 {
            let m = rng.random_range(1..5);
            let p = rng.random_range(1..5);
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..p).map(|_| rng.random_range(-1.0..3.0)).collect())
                .collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..4.0)).collect();
            let c: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..2.0)).collect();
            let refs: Vec<&[f64]> = a.iter().map(Vec::as_slice).collect();
            let s = solve_lp(&lp(&refs, &b, &c)).unwrap();
            // unbounded iff some column has no positive entry
            let unbounded = (0..p).any(|j| a.iter().all(|r| r[j] <= 0.0));
            if unbounded {
                assert_eq!(s.status, SolveStatus::Unbounded);
                continue;
            }
            let want = vertex_enumeration_optimum(&a, &b, &c);
            assert_eq!(s.status, SolveStatus::Optimal);
            assert!((s.objective.unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn simulation_sized_lp_is_certified_and_deterministic() {
        use crate::scenario::{generate_instance, RngStream, ScenarioSpec};
        let spec = ScenarioSpec::iid(60, 120, 5, 1.0);
        let inst = generate_instance(&spec, &RngStream::new(9, 1)).unwrap();
        let prob = build_nominal(inst.a_true.clone(), inst.b.clone(), inst.cost.clone()).unwrap();
        let s1 = solve_lp(&prob).unwrap();
        let s2 = solve_lp(&prob).unwrap();
        assert_eq!(s1.status, SolveStatus::Optimal);
        assert!(prob.max_linear_violation(s1.x.as_ref().unwrap()) <= TOL_FEAS);
        assert_eq!(format!("{s1:?}"), format!("{s2:?}"));
    }

    #[test]
    fn builders_wrap_inputs() {
        for (m, p) in [(1, 1), (2, 3), (5, 5)] {
            let a = DenseMatrix::from_fn(m, p, |i, j| (i + 2 * j) as f64);
            let b = vec![1.0; m];
            let c = vec![2.0; p];
            for prob in [
                build_nominal(a.clone(), b.clone(), c.clone()).unwrap(),
                build_shrinkage(a.clone(), b.clone(), c.clone()).unwrap(),
            ] {
                assert_eq!(prob.a(), &a);
                assert_eq!(prob.b(), &b[..]);
                assert_eq!(prob.cost(), &c[..]);
                assert_eq!(prob.robust_radius(), 0.0);
            }
        }
        assert!(build_nominal(DenseMatrix::ones(2, 2), vec![1.0], vec![1.0, 1.0]).is_err());
        assert!(build_shrinkage(DenseMatrix::ones(2, 2), vec![1.0; 2], vec![1.0]).is_err());
    }

    #[test]
    fn solve_lp_rejects_robust_problem() {
        let p = lp(&[&[1.0]], &[4.0], &[1.0]).with_robust_radius(1.0).unwrap();
        assert!(matches!(solve_lp(&p), Err(SolverError::Precondition(_))));
    }
}
