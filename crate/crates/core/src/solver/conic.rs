//! Primal-dual interior-point method for the robust model written as a conic
//! program over `z = (x, t)`:
//!
//! ```text
//! minimize  -cᵀx
//! s.t.      āᵢᵀx + γ t + sᵢ = bᵢ        sᵢ >= 0        (m rows)
//!           -xⱼ + s_{m+j} = 0          s_{m+j} >= 0    (p rows)
//!           -(t, x) + s_q = 0          s_q ∈ Q         (one cone of size p + 1)
//! ```
//!
//! `Q = {(u₀, u₁) : u₀ >= ‖u₁‖₂}`. Steps follow Mehrotra predictor-corrector
//! on Nesterov-Todd scaled Newton systems, reduced to the `(p+1)×(p+1)`
//! normal matrix `GᵀW⁻²G`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::matrix::{dot, norm2, DenseMatrix};

const STEP_FRACTION: f64 = 0.99;
const DIVERGED: f64 = 1e13;

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub feastol: f64,
    pub reltol: f64,
    /// Looser acceptance used when progress stalls.
    pub reltol_inaccurate: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            feastol: 1e-9,
            reltol: 1e-9,
            reltol_inaccurate: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub status: IpmStatus,
    pub x: Vec<f64>,
    /// Upper bound on the maximum, from the dual iterate.
    pub dual_bound: f64,
    pub iterations: usize,
}

/// Conic data with the layout described in the module docs.
struct Problem<'a> {
    a: &'a DenseMatrix,
    b: &'a [f64],
    cost: &'a [f64],
    gamma: f64,
    m: usize,
    p: usize,
}

/// Nesterov-Todd scaling `W = η H(w̄)` of the second-order cone block, with
/// `H(w̄)` the hyperbolic reflection taking `e` to `w̄` and `w̄ᵀJw̄ = 1`.
#[derive(Debug, Clone)]
struct SocScaling {
    eta: f64,
    w0: f64,
    w1: Vec<f64>,
}

impl SocScaling {
    fn identity(len: usize) -> Self {
        Self {
            eta: 1.0,
            w0: 1.0,
            w1: vec![0.0; len],
        }
    }

    fn nt(s: &[f64], y: &[f64]) -> Option<Self> {
        let ds = soc_det_sqrt(s)?;
        let dy = soc_det_sqrt(y)?;
        let sb: Vec<f64> = s.iter().map(|v| v / ds).collect();
        let yb: Vec<f64> = y.iter().map(|v| v / dy).collect();
        let g = ((1.0 + dot(&sb, &yb)) / 2.0).sqrt();
        let w0 = (sb[0] + yb[0]) / (2.0 * g);
        let w1 = sb[1..].iter().zip(&yb[1..]).map(|(a, b)| (a - b) / (2.0 * g)).collect();
        Some(Self {
            eta: (ds / dy).sqrt(),
            w0,
            w1,
        })
    }

    /// `W v`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let inner = dot(&self.w1, &v[1..]);
        out[0] = self.eta * (self.w0 * v[0] + inner);
        let k = v[0] + inner / (1.0 + self.w0);
        for ((o, &vi), &wi) in out[1..].iter_mut().zip(&v[1..]).zip(&self.w1) {
            *o = self.eta * (vi + k * wi);
        }
    }

    /// `W⁻¹ v`.
    fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        let inner = dot(&self.w1, &v[1..]);
        out[0] = (self.w0 * v[0] - inner) / self.eta;
        let k = -v[0] + inner / (1.0 + self.w0);
        for ((o, &vi), &wi) in out[1..].iter_mut().zip(&v[1..]).zip(&self.w1) {
            *o = (vi + k * wi) / self.eta;
        }
    }

    /// `W⁻² v = η⁻² (2 Jw̄ w̄ᵀJ − J) v`.
    fn apply_inv_sq(&self, v: &[f64], out: &mut [f64]) {
        let e2 = self.eta * self.eta;
        let inner = dot(&self.w1, &v[1..]);
        let lead = self.w0 * v[0] - inner;
        out[0] = (2.0 * self.w0 * lead - v[0]) / e2;
        for ((o, &vi), &wi) in out[1..].iter_mut().zip(&v[1..]).zip(&self.w1) {
            *o = (vi - 2.0 * wi * lead) / e2;
        }
    }
}

/// `sqrt(u₀² − ‖u₁‖²)` for `u` in the cone interior.
fn soc_det_sqrt(u: &[f64]) -> Option<f64> {
    let r = norm2(&u[1..]);
    let d = (u[0] - r) * (u[0] + r);
    (u[0] > 0.0 && d > 0.0).then(|| d.sqrt())
}

/// Jordan product `u ∘ v = (uᵀv, u₀v₁ + v₀u₁)` on the cone block.
fn soc_product(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = dot(u, v);
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
}

/// Solves `λ ∘ u = r` on the cone block.
fn soc_divide(lambda: &[f64], r: &[f64], out: &mut [f64]) {
    let r1 = norm2(&lambda[1..]);
    let det = (lambda[0] - r1) * (lambda[0] + r1);
    let u0 = (lambda[0] * r[0] - dot(&lambda[1..], &r[1..])) / det;
    out[0] = u0;
    for i in 1..lambda.len() {
        out[i] = (r[i] - u0 * lambda[i]) / lambda[0];
    }
}

/// Largest `α >= 0` with `u + α d` in the cone, `u` interior.
fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = (u[0] - norm2(&u[1..])) * (u[0] + norm2(&u[1..]));
    if d[0] >= norm2(&d[1..]) {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    if a.abs() < 1e-300 {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc < 0.0 {
            return f64::INFINITY;
        }
        let q = -(b + b.signum() * disc.sqrt());
        for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
            if root > 0.0 && root < best {
                best = root;
            }
        }
    }
    best.max(0.0)
}

fn lp_max_step(u: &[f64], d: &[f64]) -> f64 {
    u.iter()
        .zip(d)
        .filter(|(_, &di)| di < 0.0)
        .map(|(&ui, &di)| -ui / di)
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a symmetric positive definite matrix stored row-major.
/// Near-singular matrices get a growing diagonal shift until they factor.
fn factorize(mat: &[f64], n: usize) -> Cholesky<f64, Dyn> {
    let scale = (0..n).map(|i| mat[i * n + i].abs()).fold(0.0, f64::max).max(1.0);
    let mut shift = 0.0;
    loop {
        let mut m = DMatrix::from_row_slice(n, n, mat);
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(chol) = Cholesky::new(m) {
            return chol;
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
}

fn cholesky_solve(chol: &Cholesky<f64, Dyn>, rhs: &mut [f64]) {
    let mut v = DVector::from_column_slice(rhs);
    chol.solve_mut(&mut v);
    rhs.copy_from_slice(v.as_slice());
}

struct Scaling {
    /// `sqrt(sᵢ / yᵢ)` on the orthant block.
    w: Vec<f64>,
    soc: SocScaling,
}

impl<'a> Problem<'a> {
    fn n(&self) -> usize {
        self.p + 1
    }

    fn orthant(&self) -> usize {
        self.m + self.p
    }

    fn cone_len(&self) -> usize {
        self.m + 2 * self.p + 1
    }

    /// `G z`.
    fn g(&self, z: &[f64], out: &mut [f64]) {
        let (x, t) = (&z[..self.p], z[self.p]);
        for (o, row) in out[..self.m].iter_mut().zip(self.a.row_iter()) {
            *o = dot(row, x) + self.gamma * t;
        }
        for (o, &xj) in out[self.m..self.orthant()].iter_mut().zip(x) {
            *o = -xj;
        }
        let soc = &mut out[self.orthant()..];
        soc[0] = -t;
        for (o, &xj) in soc[1..].iter_mut().zip(x) {
            *o = -xj;
        }
    }

    /// `Gᵀ v`.
    fn gt(&self, v: &[f64], out: &mut [f64]) {
        let p = self.p;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (row, &vi) in self.a.row_iter().zip(&v[..self.m]) {
            if vi != 0.0 {
                for (o, &aij) in out[..p].iter_mut().zip(row) {
                    *o += aij * vi;
                }
            }
        }
        let soc = &v[self.orthant()..];
        for j in 0..p {
            out[j] -= v[self.m + j] + soc[1 + j];
        }
        out[p] = self.gamma * v[..self.m].iter().sum::<f64>() - soc[0];
    }

    fn h_dot(&self, v: &[f64]) -> f64 {
        dot(self.b, &v[..self.m])
    }

    fn q_dot(&self, z: &[f64]) -> f64 {
        -dot(self.cost, &z[..self.p])
    }

    /// Writes `q = (−c, 0)`.
    fn q(&self, out: &mut [f64]) {
        for (o, &c) in out.iter_mut().zip(self.cost) {
            *o = -c;
        }
        out[self.p] = 0.0;
    }

    /// `GᵀW⁻²G` with orthant weights `d = 1/w²` and the cone scaling.
    fn normal_matrix(&self, d: &[f64], soc: &SocScaling) -> Vec<f64> {
        let (m, p, n) = (self.m, self.p, self.n());
        let mut scaled = Vec::with_capacity(m * p);
        for (row, &di) in self.a.row_iter().zip(&d[..m]) {
            let r = di.sqrt();
            scaled.extend(row.iter().map(|v| v * r));
        }
        let mut gram = vec![0.0; p * p];
        if m > 0 && p > 0 {
            // SAFETY: `scaled` is m×p row-major, read as its p×m transpose
            // through swapped strides; `gram` holds p*p elements.
            unsafe {
                matrixmultiply::dgemm(
                    p,
                    m,
                    p,
                    1.0,
                    scaled.as_ptr(),
                    1,
                    p as isize,
                    scaled.as_ptr(),
                    p as isize,
                    1,
                    0.0,
                    gram.as_mut_ptr(),
                    p as isize,
                    1,
                );
            }
        }
        let mut mat = vec![0.0; n * n];
        for i in 0..p {
            mat[i * n..i * n + p].copy_from_slice(&gram[i * p..(i + 1) * p]);
        }
        let mut cross = vec![0.0; p];
        for (row, &di) in self.a.row_iter().zip(&d[..m]) {
            for (c, &aij) in cross.iter_mut().zip(row) {
                *c += di * aij;
            }
        }
        let e2 = soc.eta * soc.eta;
        let sum_d: f64 = d[..m].iter().sum();
        mat[p * n + p] = self.gamma * self.gamma * sum_d + (2.0 * soc.w0 * soc.w0 - 1.0) / e2;
        for i in 0..p {
            let v = self.gamma * cross[i] - 2.0 * soc.w0 * soc.w1[i] / e2;
            mat[i * n + p] = v;
            mat[p * n + i] = v;
            mat[i * n + i] += d[m + i] + 1.0 / e2;
            let wi = 2.0 * soc.w1[i] / e2;
            if wi != 0.0 {
                for (dst, &wj) in mat[i * n..i * n + p].iter_mut().zip(&soc.w1) {
                    *dst += wi * wj;
                }
            }
        }
        mat
    }
}

impl Scaling {
    fn apply(&self, prob: &Problem, v: &[f64], out: &mut [f64]) {
        let l = prob.orthant();
        for i in 0..l {
            out[i] = self.w[i] * v[i];
        }
        self.soc.apply(&v[l..], &mut out[l..]);
    }

    fn apply_inv(&self, prob: &Problem, v: &[f64], out: &mut [f64]) {
        let l = prob.orthant();
        for i in 0..l {
            out[i] = v[i] / self.w[i];
        }
        self.soc.apply_inv(&v[l..], &mut out[l..]);
    }

    fn apply_inv_sq(&self, prob: &Problem, v: &[f64], out: &mut [f64]) {
        let l = prob.orthant();
        for i in 0..l {
            out[i] = v[i] / (self.w[i] * self.w[i]);
        }
        self.soc.apply_inv_sq(&v[l..], &mut out[l..]);
    }
}

/// Shifts `u` into the cone interior when it is not already inside.
fn push_interior(prob: &Problem, u: &mut [f64]) {
    let l = prob.orthant();
    let min_lp = u[..l].iter().copied().fold(f64::INFINITY, f64::min);
    let min_soc = u[l] - norm2(&u[l + 1..]);
    let alpha = -min_lp.min(min_soc);
    if alpha >= 0.0 {
        let shift = 1.0 + alpha;
        u[..l].iter_mut().for_each(|v| *v += shift);
        u[l] += shift;
    }
}

fn max_step(prob: &Problem, u: &[f64], d: &[f64]) -> f64 {
    let l = prob.orthant();
    lp_max_step(&u[..l], &d[..l]).min(soc_max_step(&u[l..], &d[l..]))
}

/// Newton direction for the complementarity target `rcomp`.
struct Direction {
    dz: Vec<f64>,
    ds: Vec<f64>,
    dy: Vec<f64>,
    /// `W⁻¹ ds` and `W dy`, used by the corrector.
    ds_scaled: Vec<f64>,
    dy_scaled: Vec<f64>,
}

struct Kkt<'p, 'a> {
    prob: &'p Problem<'a>,
    scaling: Scaling,
    lambda: Vec<f64>,
    normal: Vec<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl<'p, 'a> Kkt<'p, 'a> {
    fn solve(&self, rp: &[f64], rd: &[f64], rcomp: &[f64]) -> Direction {
        let prob = self.prob;
        let (l, k, n) = (prob.orthant(), prob.cone_len(), prob.n());
        let mut t = vec![0.0; k];
        for i in 0..l {
            t[i] = rcomp[i] / self.lambda[i];
        }
        soc_divide(&self.lambda[l..], &rcomp[l..], &mut t[l..]);
        let mut wt = vec![0.0; k];
        self.scaling.apply(prob, &t, &mut wt);
        let shifted: Vec<f64> = rp.iter().zip(&wt).map(|(a, b)| a + b).collect();
        let mut tmp = vec![0.0; k];
        self.scaling.apply_inv_sq(prob, &shifted, &mut tmp);
        let mut rhs = vec![0.0; n];
        prob.gt(&tmp, &mut rhs);
        for (r, &d) in rhs.iter_mut().zip(rd) {
            *r = -d - *r;
        }
        let mut dz = rhs.clone();
        cholesky_solve(&self.factor, &mut dz);
        // One step of iterative refinement against the unfactored matrix.
        let mut resid = rhs;
        for i in 0..n {
            resid[i] -= dot(&self.normal[i * n..(i + 1) * n], &dz);
        }
        cholesky_solve(&self.factor, &mut resid);
        dz.iter_mut().zip(&resid).for_each(|(a, b)| *a += b);

        let mut gdz = vec![0.0; k];
        prob.g(&dz, &mut gdz);
        let ds: Vec<f64> = gdz.iter().zip(rp).map(|(g, r)| -r - g).collect();
        let sum: Vec<f64> = gdz.iter().zip(&shifted).map(|(g, s)| g + s).collect();
        let mut dy = vec![0.0; k];
        self.scaling.apply_inv_sq(prob, &sum, &mut dy);
        let mut ds_scaled = vec![0.0; k];
        self.scaling.apply_inv(prob, &ds, &mut ds_scaled);
        let mut dy_scaled = vec![0.0; k];
        self.scaling.apply(prob, &dy, &mut dy_scaled);
        Direction {
            dz,
            ds,
            dy,
            ds_scaled,
            dy_scaled,
        }
    }
}

fn jordan_product(prob: &Problem, u: &[f64], v: &[f64], out: &mut [f64]) {
    let l = prob.orthant();
    for i in 0..l {
        out[i] = u[i] * v[i];
    }
    soc_product(&u[l..], &v[l..], &mut out[l..]);
}

/// Maximizes `costᵀx` s.t. `āᵢᵀx + γ‖x‖₂ <= bᵢ`, `x >= 0`.
pub(crate) fn solve_socp(
    a: &DenseMatrix,
    b: &[f64],
    cost: &[f64],
    gamma: f64,
    settings: &IpmSettings,
) -> IpmResult {
    let prob = Problem {
        a,
        b,
        cost,
        gamma,
        m: a.rows(),
        p: a.cols(),
    };
    let (l, k, n) = (prob.orthant(), prob.cone_len(), prob.n());
    let nu = (l + 1) as f64;
    let h_norm = norm2(b).max(1.0);
    let mut qv = vec![0.0; n];
    prob.q(&mut qv);
    let q_norm = norm2(&qv).max(1.0);

    // Least-norm starting point with W = I.
    let ones_d = vec![1.0; l];
    let normal = prob.normal_matrix(&ones_d, &SocScaling::identity(prob.p));
    let factor = factorize(&normal, n);
    let mut h_full = vec![0.0; k];
    h_full[..prob.m].copy_from_slice(b);
    let mut z = vec![0.0; n];
    prob.gt(&h_full, &mut z);
    cholesky_solve(&factor, &mut z);
    let mut s = vec![0.0; k];
    prob.g(&z, &mut s);
    s.iter_mut().zip(&h_full).for_each(|(si, hi)| *si = hi - *si);
    push_interior(&prob, &mut s);
    let mut w = qv.clone();
    cholesky_solve(&factor, &mut w);
    let mut y = vec![0.0; k];
    prob.g(&w, &mut y);
    y.iter_mut().for_each(|v| *v = -*v);
    push_interior(&prob, &mut y);

    let mut rp = vec![0.0; k];
    let mut rd = vec![0.0; n];
    let mut status = IpmStatus::IterationLimit;
    let mut iterations = 0;
    let mut best_inaccurate: Option<(Vec<f64>, f64)> = None;
    for it in 0..settings.max_iter {
        iterations = it;
        prob.g(&z, &mut rp);
        for i in 0..k {
            rp[i] += s[i] - h_full[i];
        }
        prob.gt(&y, &mut rd);
        rd.iter_mut().zip(&qv).for_each(|(r, q)| *r += q);
        let pcost = prob.q_dot(&z);
        let dcost = -prob.h_dot(&y);
        let gap = dot(&s, &y);
        let mu = gap / nu;
        let presid = norm2(&rp) / h_norm;
        let dresid = norm2(&rd) / q_norm;
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        let relgap = relgap.min(gap);
        if presid <= settings.feastol && dresid <= settings.feastol && relgap <= settings.reltol {
            status = IpmStatus::Optimal;
            break;
        }
        if presid <= settings.feastol.sqrt() && dresid <= settings.feastol.sqrt() && relgap <= settings.reltol_inaccurate
        {
            best_inaccurate = Some((z[..prob.p].to_vec(), prob.h_dot(&y)));
        }
        let hy = prob.h_dot(&y);
        if hy < 0.0 {
            let mut gty = vec![0.0; n];
            prob.gt(&y, &mut gty);
            if norm2(&gty) / -hy <= settings.feastol * q_norm.max(1.0) {
                status = IpmStatus::Infeasible;
                break;
            }
        }
        let qz = prob.q_dot(&z);
        if qz < 0.0 {
            let mut gz = vec![0.0; k];
            prob.g(&z, &mut gz);
            let r = gz.iter().zip(&s).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
            if r / -qz <= settings.feastol * h_norm {
                status = IpmStatus::Unbounded;
                break;
            }
        }
        if norm2(&z) > DIVERGED || norm2(&y) > DIVERGED {
            break;
        }

        let Some(soc) = SocScaling::nt(&s[l..], &y[l..]) else {
            break;
        };
        let scaling = Scaling {
            w: s[..l].iter().zip(&y[..l]).map(|(si, yi)| (si / yi).sqrt()).collect(),
            soc,
        };
        let mut lambda = vec![0.0; k];
        scaling.apply(&prob, &y, &mut lambda);
        let d: Vec<f64> = scaling.w.iter().map(|wi| 1.0 / (wi * wi)).collect();
        let normal = prob.normal_matrix(&d, &scaling.soc);
        let factor = factorize(&normal, n);
        let kkt = Kkt {
            prob: &prob,
            scaling,
            lambda,
            normal,
            factor,
        };

        let mut ll = vec![0.0; k];
        jordan_product(&prob, &kkt.lambda, &kkt.lambda, &mut ll);
        let rcomp_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
        let aff = kkt.solve(&rp, &rd, &rcomp_aff);
        let alpha_aff = max_step(&prob, &s, &aff.ds).min(max_step(&prob, &y, &aff.dy)).min(1.0);
        let sigma = (1.0 - alpha_aff).clamp(0.0, 1.0).powi(3);

        let mut corr = vec![0.0; k];
        jordan_product(&prob, &aff.ds_scaled, &aff.dy_scaled, &mut corr);
        let mut rcomp: Vec<f64> = ll.iter().zip(&corr).map(|(a, c)| -a - c).collect();
        for v in &mut rcomp[..l] {
            *v += sigma * mu;
        }
        rcomp[l] += sigma * mu;
        let dir = kkt.solve(&rp, &rd, &rcomp);
        let alpha = (STEP_FRACTION * max_step(&prob, &s, &dir.ds).min(max_step(&prob, &y, &dir.dy))).min(1.0);
        if alpha < 1e-12 {
            break;
        }
        z.iter_mut().zip(&dir.dz).for_each(|(v, d)| *v += alpha * d);
        s.iter_mut().zip(&dir.ds).for_each(|(v, d)| *v += alpha * d);
        y.iter_mut().zip(&dir.dy).for_each(|(v, d)| *v += alpha * d);
        iterations = it + 1;
    }
    let dual_bound = prob.h_dot(&y);
    match status {
        IpmStatus::Optimal => IpmResult {
            status,
            x: z[..prob.p].to_vec(),
            dual_bound,
            iterations,
        },
        IpmStatus::IterationLimit => match best_inaccurate {
            Some((x, bound)) => IpmResult {
                status: IpmStatus::Optimal,
                x,
                dual_bound: bound,
                iterations,
            },
            None => IpmResult {
                status,
                x: Vec::new(),
                dual_bound: f64::INFINITY,
                iterations,
            },
        },
        _ => IpmResult {
            status,
            x: Vec::new(),
            dual_bound: f64::INFINITY,
            iterations,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nt_scaling_maps_both_points_to_lambda() {
        let s = [3.0, 1.0, -0.5, 0.7];
        let y = [2.0, -0.4, 0.3, 1.1];
        let w = SocScaling::nt(&s, &y).unwrap();
        let mut wy = [0.0; 4];
        let mut winv_s = [0.0; 4];
        w.apply(&y, &mut wy);
        w.apply_inv(&s, &mut winv_s);
        for (a, b) in wy.iter().zip(&winv_s) {
            assert!((a - b).abs() < 1e-12, "{wy:?} vs {winv_s:?}");
        }
        let mut back = [0.0; 4];
        let mut sq = [0.0; 4];
        w.apply_inv(&wy, &mut back);
        w.apply_inv(&back, &mut sq);
        let mut direct = [0.0; 4];
        w.apply_inv_sq(&wy, &mut direct);
        for (a, b) in sq.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let lam = [2.0, 0.5, -0.3];
        let u = [0.4, -1.0, 2.0];
        let mut r = [0.0; 3];
        soc_product(&lam, &u, &mut r);
        let mut back = [0.0; 3];
        soc_divide(&lam, &r, &mut back);
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cone_step_stops_on_boundary() {
        let u = [2.0, 0.0];
        assert!((soc_max_step(&u, &[0.0, 1.0]) - 2.0).abs() < 1e-12);
        assert_eq!(soc_max_step(&u, &[1.0, 0.5]), f64::INFINITY);
        let alpha = soc_max_step(&[1.0, 0.2, 0.1], &[-1.0, 0.3, 0.0]);
        let v: Vec<f64> = [1.0, 0.2, 0.1].iter().zip([-1.0, 0.3, 0.0]).map(|(a, b)| a + alpha * b).collect();
        assert!((v[0] - norm2(&v[1..])).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let f = factorize(&a, 3);
        let mut x = [1.0, -2.0, 0.5];
        cholesky_solve(&f, &mut x);
        let back: Vec<f64> = (0..3).map(|i| dot(&a[i * 3..i * 3 + 3], &x)).collect();
        for (b, r) in back.iter().zip([1.0, -2.0, 0.5]) {
            assert!((b - r).abs() < 1e-12);
        }
    }
}
