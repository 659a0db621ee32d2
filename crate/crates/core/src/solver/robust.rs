use serde::{Deserialize, Serialize};

use super::conic::{self, IpmSettings, IpmStatus};
use super::simplex::{Outcome, Tableau};
use super::{ConstrainedProblem, Solution, SolveStatus, SolverError, TOL_FEAS, TOL_OPT};
use crate::matrix::{dot, norm2};

/// `āᵀx + γ‖x‖₂`, the worst case of `(ā + δ)ᵀx` over `‖δ‖₂ <= γ`.
pub fn robust_support_value(a_bar: &[f64], x: &[f64], gamma: f64) -> f64 {
    dot(a_bar, x) + gamma * norm2(x)
}

/// Worst case of `(y ā + z)ᵀx` over `|y| <= α`, `‖z‖_∞ <= β`:
/// `α |āᵀx| + β ‖x‖₁`, which is `(α ā + β 𝟙)ᵀx` when `ā, x >= 0`.
pub fn box_support_value(a_bar: &[f64], x: &[f64], alpha: f64, beta: f64) -> f64 {
    alpha * dot(a_bar, x).abs() + beta * x.iter().map(|v| v.abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobustMethod {
    /// Primal-dual interior point on the second-order cone program.
    #[default]
    InteriorPoint,
    /// Support-hyperplane outer linearization over the simplex core.
    CuttingPlane,
}

#[derive(Debug, Clone, Copy)]
pub struct RobustOptions {
    pub method: RobustMethod,
    /// Cutting-plane round limit.
    pub max_rounds: usize,
    pub tol_feas: f64,
    /// Relative objective gap accepted after scaling the incumbent back into
    /// the robust feasible set.
    pub tol_gap: f64,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            method: RobustMethod::default(),
            max_rounds: 200,
            tol_feas: TOL_FEAS,
            tol_gap: TOL_OPT,
        }
    }
}

/// Solves the robust model `max cᵀx` s.t. `āᵢᵀx + γ‖x‖₂ <= bᵢ`, `x >= 0`.
///
/// Optimal results satisfy every robust row within `tol_feas` and are checked
/// against a dual bound: the interior-point path certifies a relative gap of
/// at most [`IPM_GAP_TOL`].
pub fn solve_robust(problem: &ConstrainedProblem, opts: &RobustOptions) -> Result<Solution, SolverError> {
    let gamma = problem.robust_radius();
    if gamma <= 0.0 {
        return Err(SolverError::Precondition(format!(
            "solve_robust needs robust_radius > 0, got {gamma}"
        )));
    }
    Ok(match opts.method {
        RobustMethod::InteriorPoint => solve_interior_point(problem),
        RobustMethod::CuttingPlane => solve_cutting_plane(problem, opts),
    })
}

/// Relative gap between the reported objective and the dual bound accepted
/// from the interior-point path.
pub const IPM_GAP_TOL: f64 = 1e-6;

fn solve_interior_point(problem: &ConstrainedProblem) -> Solution {
    let res = conic::solve_socp(
        problem.a(),
        problem.b(),
        problem.cost(),
        problem.robust_radius(),
        &IpmSettings::default(),
    );
    let status = match res.status {
        IpmStatus::Optimal => SolveStatus::Optimal,
        IpmStatus::Infeasible => SolveStatus::Infeasible,
        IpmStatus::Unbounded => SolveStatus::Unbounded,
        IpmStatus::IterationLimit => SolveStatus::IterationLimit,
    };
    if status != SolveStatus::Optimal {
        return Solution::failed(status, res.iterations, 0);
    }
    let mut x = res.x;
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let norm = norm2(&x);
    if problem.max_robust_violation(&x) > 0.0 {
        if let Some(lambda) = feasible_scale(problem, &x, norm) {
            x.iter_mut().for_each(|v| *v *= lambda);
        }
    }
    let sol = finish_robust(problem, x, res.iterations, 0);
    if let Some(obj) = sol.objective {
        if res.dual_bound - obj > IPM_GAP_TOL * obj.abs().max(1.0) {
            let mut failed = Solution::failed(SolveStatus::IterationLimit, res.iterations, 0);
            failed.max_violation = sol.max_violation;
            return failed;
        }
    }
    sol
}

/// Support-hyperplane cutting planes over the simplex core.
///
/// Every robust row shares the term `γ‖x‖₂`, so the LP carries one extra
/// variable `t` with rows `āᵢᵀx + γ t <= bᵢ` and outer-approximates
/// `t >= ‖x‖₂` by the cuts `(x̂/‖x̂‖₂)ᵀ x <= t` at each incumbent `x̂`.
/// Substituting a cut into row `i` gives `(āᵢ + γ x̂/‖x̂‖₂)ᵀ x <= bᵢ`, the
/// supporting hyperplane of that row's robust constraint at `x̂`, so one cut
/// tightens every row at once. The relaxation starts at `A x <= b` (valid
/// because `γ‖x‖₂ >= 0`) and is re-optimized by dual simplex after each cut.
///
/// Rounds stop when the incumbent violates no robust row by more than
/// `tol_feas`, or when shrinking it toward the origin restores robust
/// feasibility at a relative objective cost of at most `tol_gap`; the
/// shrunk point is then returned. At `x = 0` the robust constraints read `0 <= bᵢ` and no cut is
/// generated.
fn solve_cutting_plane(problem: &ConstrainedProblem, opts: &RobustOptions) -> Solution {
    let gamma = problem.robust_radius();
    let a = problem.a();
    let b = problem.b();
    let p = a.cols();
    let rows: Vec<Vec<f64>> = a
        .row_iter()
        .map(|r| {
            let mut row = Vec::with_capacity(p + 1);
            row.extend_from_slice(r);
            row.push(gamma);
            row
        })
        .collect();
    let mut cost = problem.cost().to_vec();
    cost.push(0.0);
    let mut tableau = Tableau::new(rows.iter().map(Vec::as_slice).collect(), b, &cost);
    let mut outcome = tableau.solve();
    let mut cuts = 0usize;
    let mut inner: Option<(Vec<f64>, f64)> = None;
    let mut last_violation = None;
    for _round in 0..opts.max_rounds {
        if outcome != Outcome::Optimal {
            return Solution::failed(outcome.into(), tableau.pivots, cuts);
        }
        let mut x = tableau.primal_values();
        x.truncate(p);
        let upper = tableau.objective();
        let norm = norm2(&x);
        let worst = problem.max_robust_violation(&x);
        last_violation = Some(worst);
        if worst <= opts.tol_feas || norm == 0.0 {
            return finish_robust(problem, x, tableau.pivots, cuts);
        }
        if let Some(lambda) = feasible_scale(problem, &x, norm) {
            let value = lambda * dot(problem.cost(), &x);
            if inner.as_ref().is_none_or(|(_, best)| value > *best) {
                inner = Some((x.iter().map(|v| v * lambda).collect(), value));
            }
        }
        if let Some((best_x, best)) = &inner {
            if upper - best <= opts.tol_gap * upper.abs().max(1.0) {
                let best_x = best_x.clone();
                return finish_robust(problem, best_x, tableau.pivots, cuts);
            }
            // In-out separation: a second cut at the midpoint toward the best
            // feasible point damps the oscillation of pure outer cuts.
            let mid: Vec<f64> = best_x.iter().zip(&x).map(|(a, b)| 0.5 * (a + b)).collect();
            let mid_norm = norm2(&mid);
            if mid_norm > 0.0 {
                tableau.add_row(&epigraph_cut(&mid, mid_norm), 0.0);
                cuts += 1;
            }
        }
        tableau.add_row(&epigraph_cut(&x, norm), 0.0);
        cuts += 1;
        outcome = tableau.reoptimize();
    }
    if outcome == Outcome::Optimal {
        let mut x = tableau.primal_values();
        x.truncate(p);
        let worst = problem.max_robust_violation(&x);
        if worst <= opts.tol_feas {
            return finish_robust(problem, x, tableau.pivots, cuts);
        }
        last_violation = Some(worst);
        if let Some((best_x, best)) = inner {
            let upper = tableau.objective();
            if upper - best <= opts.tol_gap * upper.abs().max(1.0) {
                return finish_robust(problem, best_x, tableau.pivots, cuts);
            }
        }
    }
    let status = if outcome == Outcome::Optimal {
        SolveStatus::IterationLimit
    } else {
        outcome.into()
    };
    let mut s = Solution::failed(status, tableau.pivots, cuts);
    s.max_violation = last_violation;
    s
}

/// `(x̂/‖x̂‖₂, -1)`: the row of `x̂ᵀx / ‖x̂‖₂ - t <= 0`.
fn epigraph_cut(x_hat: &[f64], norm: f64) -> Vec<f64> {
    let mut row: Vec<f64> = x_hat.iter().map(|v| v / norm).collect();
    row.push(-1.0);
    row
}

/// Largest `λ <= 1` with `λ x` robust-feasible, when every `bᵢ > 0`.
///
/// The relaxation optimum bounds the robust optimum from above, so `λ x`
/// is within a relative `1 - λ` of optimal whenever `cᵀx > 0`.
fn feasible_scale(problem: &ConstrainedProblem, x: &[f64], norm: f64) -> Option<f64> {
    if dot(problem.cost(), x) <= 0.0 {
        return None;
    }
    let gamma = problem.robust_radius();
    let mut lambda = 1.0f64;
    for (row, &bi) in problem.a().row_iter().zip(problem.b()) {
        if bi <= 0.0 {
            return None;
        }
        let lhs = dot(row, x) + gamma * norm;
        if lhs > bi {
            lambda = lambda.min(bi / lhs);
        }
    }
    Some(lambda)
}

fn finish_robust(problem: &ConstrainedProblem, x: Vec<f64>, iterations: usize, cuts: usize) -> Solution {
    let viol = problem.max_robust_violation(&x);
    if x.iter().any(|&v| v < -TOL_FEAS) || viol > TOL_FEAS {
        let mut failed = Solution::failed(SolveStatus::IterationLimit, iterations, cuts);
        failed.max_violation = Some(viol);
        return failed;
    }
    Solution {
        status: SolveStatus::Optimal,
        objective: Some(dot(problem.cost(), &x)),
        x: Some(x),
        iterations,
        cutting_planes_added: cuts,
        max_violation: Some(viol.max(0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;
    use crate::scenario::RngStream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn robust_with(a: &[Vec<f64>], b: &[f64], c: &[f64], gamma: f64, method: RobustMethod) -> Solution {
        let p = ConstrainedProblem::new(DenseMatrix::from_rows(a).unwrap(), b.to_vec(), c.to_vec(), gamma).unwrap();
        let opts = RobustOptions {
            method,
            ..RobustOptions::default()
        };
        solve_robust(&p, &opts).unwrap()
    }

    fn robust(a: &[Vec<f64>], b: &[f64], c: &[f64], gamma: f64) -> Solution {
        robust_with(a, b, c, gamma, RobustMethod::default())
    }

    fn random_instance(rng: &mut RngStream, m: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let a = (0..m)
            .map(|_| (0..p).map(|_| rng.random_range(4.0..6.0)).collect())
            .collect();
        let b = (0..m).map(|_| rng.random_range(4.0..6.0)).collect();
        let c = (0..p).map(|_| rng.random_range(4.0..6.0)).collect();
        (a, b, c)
    }

    #[test]
    fn one_dimensional_robust() {
        for method in [RobustMethod::InteriorPoint, RobustMethod::CuttingPlane] {
            let s = robust_with(&[vec![1.0]], &[4.0], &[1.0], 1.0, method);
            assert_eq!(s.status, SolveStatus::Optimal);
            assert!((s.x.unwrap()[0] - 2.0).abs() < 1e-7, "{method:?}");
        }
        let lp = ConstrainedProblem::new(DenseMatrix::ones(1, 1), vec![4.0], vec![1.0], 0.0).unwrap();
        assert!(solve_robust(&lp, &RobustOptions::default()).is_err());
        assert_eq!(super::super::solve_lp(&lp).unwrap().objective, Some(4.0));
    }

    #[test]
    fn support_value_examples() {
        let v = robust_support_value(&[1.0, 1.0], &[1.0, 1.0], 1.0);
        assert!((v - (2.0 + 2f64.sqrt())).abs() < 1e-15);
        assert_eq!(robust_support_value(&[1.0, 2.0], &[3.0, 4.0], 0.0), 11.0);
    }

    #[test]
    fn support_value_dominates_ball_samples() {
        let mut rng = RngStream::new(17, 0);
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let gamma = 0.7;
        let value = robust_support_value(&a, &x, gamma);
        for _ in 0..10_000 {
            let dir: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let r = gamma * rng.random::<f64>().powf(0.25) / norm2(&dir);
            let shifted: Vec<f64> = a.iter().zip(&dir).map(|(ai, di)| ai + r * di).collect();
            assert!(dot(&shifted, &x) <= value + 1e-12);
        }
        let nx = norm2(&x);
        let best: Vec<f64> = a.iter().zip(&x).map(|(ai, xi)| ai + gamma * xi / nx).collect();
        assert!((dot(&best, &x) - value).abs() < 1e-12);
    }

    #[test]
    fn box_counterpart_matches_sampling() {
        let mut rng = RngStream::new(3, 9);
        for _ in 0..10 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..6.0)).collect();
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0)).collect();
            let (alpha, beta) = (rng.random_range(0.0..1.0), rng.random_range(0.0..3.0));
            let closed: f64 = a.iter().zip(&x).map(|(ai, xi)| (alpha * ai + beta) * xi).sum();
            assert!((box_support_value(&a, &x, alpha, beta) - closed).abs() < 1e-12);
            for _ in 0..1000 {
                let y = rng.random_range(-alpha..=alpha);
                let val: f64 = a
                    .iter()
                    .zip(&x)
                    .map(|(ai, xi)| (y * ai + rng.random_range(-beta..=beta)) * xi)
                    .sum();
                assert!(val <= closed + 1e-12);
            }
            let at_corner: f64 = a.iter().zip(&x).map(|(ai, xi)| (alpha * ai + beta) * xi).sum();
            assert_eq!(at_corner, closed);
        }
    }

    #[test]
    fn robust_constraints_hold_and_objective_decreases_in_gamma() {
        let mut rng = RngStream::new(23, 1);
        for _ in 0..20 {
            let (a, b, c) = random_instance(&mut rng, 20, 20);
            let mut last = f64::INFINITY;
            for gamma in [0.1, 0.5, 1.0] {
                let s = robust(&a, &b, &c, gamma);
                assert_eq!(s.status, SolveStatus::Optimal, "gamma {gamma}: {s:?}");
                let x = s.x.as_ref().unwrap();
                for (row, &bi) in a.iter().zip(&b) {
                    assert!(robust_support_value(row, x, gamma) <= bi + TOL_FEAS);
                }
                let obj = s.objective.unwrap();
                assert!(obj <= last + 1e-9);
                last = obj;
            }
        }
    }

    #[test]
    fn methods_agree_and_bracket_the_optimum() {
        let mut rng = RngStream::new(5, 2);
        for _ in 0..10 {
            let (a, b, c) = random_instance(&mut rng, 12, 8);
            for gamma in [0.2, 1.0] {
                let ipm = robust_with(&a, &b, &c, gamma, RobustMethod::InteriorPoint);
                let cut = robust_with(&a, &b, &c, gamma, RobustMethod::CuttingPlane);
                let (oi, oc) = (ipm.objective.unwrap(), cut.objective.unwrap());
                assert!((oi - oc).abs() <= 1e-5 * oi.abs(), "{oi} vs {oc}");
            }
        }
    }

    #[test]
    fn larger_radius_instances_converge() {
        let mut rng = RngStream::new(8, 4);
        let (a, b, c) = random_instance(&mut rng, 60, 120);
        for gamma in [0.4, 1.6] {
            let s = robust(&a, &b, &c, gamma);
            assert_eq!(s.status, SolveStatus::Optimal);
            let x = s.x.unwrap();
            assert!(x.iter().all(|&v| v >= 0.0));
            for (row, &bi) in a.iter().zip(&b) {
                assert!(robust_support_value(row, &x, gamma) <= bi + TOL_FEAS);
            }
        }
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        for method in [RobustMethod::InteriorPoint, RobustMethod::CuttingPlane] {
            let s = robust_with(&[vec![1.0, 1.0]], &[-1.0], &[1.0, 1.0], 0.5, method);
            assert_eq!(s.status, SolveStatus::Infeasible, "{method:?}");
            let s = robust_with(&[vec![-3.0, 1.0]], &[1.0], &[1.0, 0.0], 0.5, method);
            assert_eq!(s.status, SolveStatus::Unbounded, "{method:?}");
        }
    }
}
