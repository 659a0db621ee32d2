//! Dense tableau simplex for `max cᵀx, A x <= b, x >= 0`.
//!
//! Two-phase primal simplex (Dantzig pricing, Bland's rule while stalled on
//! degenerate pivots) plus a dual simplex used after rows are appended, which
//! is how the cutting-plane loop re-optimizes without starting over.
//!
//! The tableau keeps the original rows next to the working rows. At
//! termination the working rows are rebuilt from the final basis by fresh
//! Gauss-Jordan elimination and the optimality conditions are re-checked, so
//! round-off accumulated over many pivots cannot leak into the answer.

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 50;
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    num_structural: usize,
    /// Working rows `B⁻¹ [A I]`.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Reduced costs `c_Bᵀ B⁻¹ a_j − c_j`; optimal when all are >= 0.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Slack column of each row.
    slack_of_row: Vec<usize>,
    /// Original rows `[aᵢ eᵢ]` and right-hand sides.
    orig_rows: Vec<Vec<f64>>,
    orig_rhs: Vec<f64>,
    cost: Vec<f64>,
    pub(crate) pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    /// Slack-basis tableau for `A x <= b` with objective `cost` (maximized).
    pub(crate) fn new(a_rows: Vec<&[f64]>, b: &[f64], cost: &[f64]) -> Self {
        let m = a_rows.len();
        let p = cost.len();
        let ncols = p + m;
        let orig_rows: Vec<Vec<f64>> = a_rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = Vec::with_capacity(ncols + 16);
                row.extend_from_slice(r);
                row.resize(ncols, 0.0);
                row[p + i] = 1.0;
                row
            })
            .collect();
        let mut full_cost = cost.to_vec();
        full_cost.resize(ncols, 0.0);
        Self {
            num_structural: p,
            rows: orig_rows.clone(),
            rhs: b.to_vec(),
            reduced: full_cost.iter().map(|c| -c).collect(),
            basis: (p..p + m).collect(),
            slack_of_row: (p..p + m).collect(),
            orig_rows,
            orig_rhs: b.to_vec(),
            cost: full_cost,
            pivots: 0,
            max_pivots: 50 * (ncols + m).max(20),
        }
    }

    pub(crate) fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn ncols(&self) -> usize {
        self.cost.len()
    }

    /// Solves from scratch: phase 1 if the slack basis is infeasible, then phase 2.
    pub(crate) fn solve(&mut self) -> Outcome {
        if self.rhs.iter().any(|&v| v < -PRIMAL_TOL) {
            match self.phase_one() {
                Outcome::Optimal => {}
                other => return other,
            }
        }
        match self.primal() {
            Outcome::Optimal => self.refine(),
            other => other,
        }
    }

    /// Appends `coeffs · x <= rhs` with its own slack; re-optimize with [`Self::reoptimize`].
    pub(crate) fn add_row(&mut self, coeffs: &[f64], rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_structural);
        let slack = self.ncols();
        for row in self.rows.iter_mut().chain(self.orig_rows.iter_mut()) {
            row.push(0.0);
        }
        self.cost.push(0.0);
        self.reduced.push(0.0);

        let mut orig = Vec::with_capacity(slack + 16);
        orig.extend_from_slice(coeffs);
        orig.resize(slack + 1, 0.0);
        orig[slack] = 1.0;

        let mut work = orig.clone();
        let mut work_rhs = rhs;
        for (r, &j) in self.basis.iter().enumerate() {
            let f = work[j];
            if f != 0.0 {
                axpy(&mut work, -f, &self.rows[r]);
                work_rhs -= f * self.rhs[r];
                work[j] = 0.0;
            }
        }
        self.rows.push(work);
        self.rhs.push(work_rhs);
        self.basis.push(slack);
        self.slack_of_row.push(slack);
        self.orig_rows.push(orig);
        self.orig_rhs.push(rhs);
    }

    /// Restores optimality after [`Self::add_row`] (dual simplex from the current basis).
    pub(crate) fn reoptimize(&mut self) -> Outcome {
        match self.dual() {
            Outcome::Optimal => self.refine(),
            other => other,
        }
    }

    /// Original rows (structural part first, then slacks) and right-hand sides.
    pub(crate) fn original_system(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.orig_rows, &self.orig_rhs)
    }

    /// Current values of the structural variables.
    pub(crate) fn primal_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_structural];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.num_structural {
                x[j] = self.rhs[r];
            }
        }
        x
    }

    /// Dual values of the rows (the reduced costs of their slacks).
    pub(crate) fn dual_values(&self) -> Vec<f64> {
        self.slack_of_row.iter().map(|&j| self.reduced[j]).collect()
    }

    pub(crate) fn objective(&self) -> f64 {
        self.primal_values()
            .iter()
            .zip(&self.cost)
            .map(|(x, c)| x * c)
            .sum()
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let mut prow = std::mem::take(&mut self.rows[r]);
        let inv = 1.0 / prow[j];
        prow.iter_mut().for_each(|v| *v *= inv);
        prow[j] = 1.0;
        let prhs = self.rhs[r] * inv;
        self.rhs[r] = prhs;
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                axpy(row, -f, &prow);
                row[j] = 0.0;
                self.rhs[k] -= f * prhs;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            axpy(&mut self.reduced, -f, &prow);
            self.reduced[j] = 0.0;
        }
        self.rows[r] = prow;
        self.basis[r] = j;
        self.pivots += 1;
    }

    fn entering_column(&self, bland: bool, allowed: usize) -> Option<usize> {
        let d = &self.reduced[..allowed];
        if bland {
            d.iter().position(|&v| v < -DUAL_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in d.iter().enumerate() {
                if v < -DUAL_TOL && best.is_none_or(|(_, b)| v < b) {
                    best = Some((j, v));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    /// Harris two-pass ratio test; `None` if the column is unbounded.
    fn leaving_row(&self, j: usize, bland: bool) -> Option<usize> {
        let mut bound = f64::INFINITY;
        for (r, row) in self.rows.iter().enumerate() {
            let a = row[j];
            if a > PIVOT_TOL {
                bound = bound.min((self.rhs[r].max(0.0) + PRIMAL_TOL) / a);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for (r, row) in self.rows.iter().enumerate() {
            let a = row[j];
            if a > PIVOT_TOL && self.rhs[r].max(0.0) / a <= bound {
                let better = match best {
                    None => true,
                    Some((br, ba)) => {
                        if bland {
                            self.basis[r] < self.basis[br]
                        } else {
                            a > ba
                        }
                    }
                };
                if better {
                    best = Some((r, a));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    /// Primal simplex over the first `allowed` columns.
    fn primal_over(&mut self, allowed: usize) -> Outcome {
        let mut stalled = 0usize;
        loop {
            if self.pivots >= self.max_pivots {
                return Outcome::IterationLimit;
            }
            let bland = stalled >= STALL_LIMIT;
            let Some(j) = self.entering_column(bland, allowed) else {
                return Outcome::Optimal;
            };
            let Some(r) = self.leaving_row(j, bland) else {
                return Outcome::Unbounded;
            };
            let step = self.rhs[r].max(0.0) / self.rows[r][j];
            self.pivot(r, j);
            if step <= PRIMAL_TOL {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
    }

    fn primal(&mut self) -> Outcome {
        let n = self.ncols();
        self.primal_over(n)
    }

    fn dual(&mut self) -> Outcome {
        let mut stalled = 0usize;
        loop {
            if self.pivots >= self.max_pivots {
                return Outcome::IterationLimit;
            }
            let bland = stalled >= STALL_LIMIT;
            let mut leave: Option<(usize, f64)> = None;
            for (r, &v) in self.rhs.iter().enumerate() {
                if v < -PRIMAL_TOL {
                    let better = match leave {
                        None => true,
                        Some((br, bv)) => {
                            if bland {
                                self.basis[r] < self.basis[br]
                            } else {
                                v < bv
                            }
                        }
                    };
                    if better {
                        leave = Some((r, v));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Optimal;
            };
            let row = &self.rows[r];
            let mut bound = f64::INFINITY;
            for (j, &a) in row.iter().enumerate() {
                if a < -PIVOT_TOL {
                    bound = bound.min((self.reduced[j].max(0.0) + DUAL_TOL) / -a);
                }
            }
            if !bound.is_finite() {
                return Outcome::Infeasible;
            }
            let mut enter: Option<(usize, f64)> = None;
            for (j, &a) in row.iter().enumerate() {
                if a < -PIVOT_TOL && self.reduced[j].max(0.0) / -a <= bound {
                    let better = match enter {
                        None => true,
                        Some((_, ba)) => !bland && -a > ba,
                    };
                    if better {
                        enter = Some((j, -a));
                    }
                }
            }
            let (j, a) = enter.expect("bound is attained by some column");
            let step = self.reduced[j].max(0.0) / a;
            self.pivot(r, j);
            if step <= DUAL_TOL * DUAL_TOL {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
    }

    /// Phase 1: maximize minus the sum of artificials on rows with negative rhs.
    fn phase_one(&mut self) -> Outcome {
        let n = self.ncols();
        let neg: Vec<usize> = (0..self.num_rows()).filter(|&r| self.rhs[r] < -PRIMAL_TOL).collect();
        let nart = neg.len();
        for row in &mut self.rows {
            row.resize(n + nart, 0.0);
        }
        for (k, &r) in neg.iter().enumerate() {
            self.rows[r].iter_mut().for_each(|v| *v = -*v);
            self.rhs[r] = -self.rhs[r];
            self.rows[r][n + k] = 1.0;
            self.basis[r] = n + k;
        }
        // phase-1 reduced costs: d = c1_Bᵀ T − c1 with c1 = −1 on artificials
        let mut reduced = vec![0.0; n + nart];
        for &r in &neg {
            axpy(&mut reduced, -1.0, &self.rows[r]);
        }
        for d in &mut reduced[n..] {
            *d += 1.0;
        }
        let saved_reduced = std::mem::replace(&mut self.reduced, reduced);
        let outcome = self.primal_over(n + nart);
        if outcome == Outcome::IterationLimit {
            return outcome;
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.rhs)
            .filter(|(&j, _)| j >= n)
            .map(|(_, &v)| v)
            .sum();
        let scale = 1.0 + self.orig_rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if infeasibility > 1e-7 * scale {
            return Outcome::Infeasible;
        }
        // drive remaining artificials out of the basis
        let mut r = 0;
        while r < self.num_rows() {
            if self.basis[r] >= n {
                let pick = (0..n)
                    .filter(|&j| self.rows[r][j].abs() > PIVOT_TOL)
                    .max_by(|&a, &b| self.rows[r][a].abs().total_cmp(&self.rows[r][b].abs()));
                match pick {
                    Some(j) => self.pivot(r, j),
                    None => {
                        // redundant row
                        self.rows.remove(r);
                        self.rhs.remove(r);
                        self.basis.remove(r);
                        self.slack_of_row.remove(r);
                        self.orig_rows.remove(r);
                        self.orig_rhs.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for row in &mut self.rows {
            row.truncate(n);
        }
        self.reduced = saved_reduced;
        self.recompute_reduced();
        Outcome::Optimal
    }

    fn recompute_reduced(&mut self) {
        let mut reduced: Vec<f64> = self.cost.iter().map(|c| -c).collect();
        for (r, &j) in self.basis.iter().enumerate() {
            let cb = self.cost[j];
            if cb != 0.0 {
                axpy(&mut reduced, cb, &self.rows[r]);
            }
        }
        for &j in &self.basis {
            reduced[j] = 0.0;
        }
        self.reduced = reduced;
    }

    /// Rebuilds `B⁻¹[A I | b]` from the original rows for the current basis.
    /// Returns false if the basis matrix is numerically singular.
    fn reinvert(&mut self) -> bool {
        let m = self.num_rows();
        let mut work = self.orig_rows.clone();
        let mut rhs = self.orig_rhs.clone();
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        for &j in &self.basis {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                if !assigned[r] {
                    let a = work[r][j].abs();
                    if best.is_none_or(|(_, b)| a > b) {
                        best = Some((r, a));
                    }
                }
            }
            let Some((r, a)) = best else { return false };
            if a < 1e-12 {
                return false;
            }
            assigned[r] = true;
            new_basis[r] = j;
            let mut prow = std::mem::take(&mut work[r]);
            let inv = 1.0 / prow[j];
            prow.iter_mut().for_each(|v| *v *= inv);
            prow[j] = 1.0;
            rhs[r] *= inv;
            let prhs = rhs[r];
            for (k, row) in work.iter_mut().enumerate() {
                if k == r {
                    continue;
                }
                let f = row[j];
                if f != 0.0 {
                    axpy(row, -f, &prow);
                    row[j] = 0.0;
                    rhs[k] -= f * prhs;
                }
            }
            work[r] = prow;
        }
        self.rows = work;
        self.rhs = rhs;
        self.basis = new_basis;
        self.recompute_reduced();
        true
    }

    /// Re-derives the tableau from scratch and resumes pivoting if the
    /// rebuilt tableau is no longer optimal.
    fn refine(&mut self) -> Outcome {
        for _ in 0..MAX_REFINEMENTS {
            if !self.reinvert() {
                return Outcome::IterationLimit;
            }
            let primal_ok = self.rhs.iter().all(|&v| v >= -PRIMAL_TOL);
            let dual_ok = self.reduced.iter().all(|&v| v >= -DUAL_TOL);
            let outcome = match (primal_ok, dual_ok) {
                (true, true) => return Outcome::Optimal,
                (false, true) => self.dual(),
                (true, false) => self.primal(),
                (false, false) => return Outcome::IterationLimit,
            };
            if outcome != Outcome::Optimal {
                return outcome;
            }
        }
        Outcome::IterationLimit
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(a: &[&[f64]], b: &[f64], c: &[f64]) -> (Outcome, Tableau) {
        let mut t = Tableau::new(a.to_vec(), b, c);
        let o = t.solve();
        (o, t)
    }

    #[test]
    fn one_dimensional() {
        let (o, t) = solve(&[&[1.0]], &[5.0], &[1.0]);
        assert_eq!(o, Outcome::Optimal);
        assert_eq!(t.primal_values(), vec![5.0]);
        let (o, _) = solve(&[&[1.0]], &[-1.0], &[1.0]);
        assert_eq!(o, Outcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let (o, _) = solve(&[&[1.0, -1.0]], &[1.0], &[1.0, 1.0]);
        assert_eq!(o, Outcome::Unbounded);
    }

    #[test]
    fn phase_one_with_lower_bound_row() {
        // x1 + x2 <= 4, -x1 <= -1 (x1 >= 1), max x2 - x1 → x = (1, 3)
        let (o, t) = solve(&[&[1.0, 1.0], &[-1.0, 0.0]], &[4.0, -1.0], &[-1.0, 1.0]);
        assert_eq!(o, Outcome::Optimal);
        let x = t.primal_values();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
        assert!((t.objective() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equality_pair() {
        // x1 + x2 <= 2 and -x1 - x2 <= -2 force x1 + x2 = 2; max x1
        let (o, t) = solve(&[&[1.0, 1.0], &[-1.0, -1.0]], &[2.0, -2.0], &[1.0, 0.0]);
        assert_eq!(o, Outcome::Optimal);
        assert!((t.objective() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn added_row_reoptimizes_with_dual_simplex() {
        let (o, mut t) = solve(&[&[1.0, 1.0]], &[4.0], &[1.0, 2.0]);
        assert_eq!(o, Outcome::Optimal);
        assert!((t.objective() - 8.0).abs() < 1e-12);
        t.add_row(&[0.0, 1.0], 1.0);
        assert_eq!(t.reoptimize(), Outcome::Optimal);
        let x = t.primal_values();
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let y = t.dual_values();
        assert_eq!(y.len(), 2);
        // y = (1, 1): b·y = 4 + 1 = 5 = objective
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 1.0).abs() < 1e-12);
        t.add_row(&[-1.0, 0.0], -5.0);
        assert_eq!(t.reoptimize(), Outcome::Infeasible);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance (maximization form).
        let a: [&[f64]; 3] = [
            &[0.25, -60.0, -0.04, 9.0],
            &[0.5, -90.0, -0.02, 3.0],
            &[0.0, 0.0, 1.0, 0.0],
        ];
        let (o, t) = solve(&a, &[0.0, 0.0, 1.0], &[0.75, -150.0, 0.02, -6.0]);
        assert_eq!(o, Outcome::Optimal);
        assert!((t.objective() - 0.05).abs() < 1e-9);
    }
}
