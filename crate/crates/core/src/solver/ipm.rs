//! Infeasible-start primal–dual interior point method with Nesterov–Todd
//! scaling and a Mehrotra predictor–corrector.
//!
//! The primal variable is `x = svec(X)` (off-diagonal entries scaled by √2 so
//! that `svec(A)ᵀ svec(X) = A • X`). Constraints are split into
//!
//! ```text
//!   maximize  cᵀx
//!   s.t.      E x      = b          (equality rows)
//!             G x + s  = h,  s ≥ 0  (inequality rows and negated non-negativity rows)
//!             X ⪰ 0
//! ```
//!
//! with dual `S = Eᵀy + Gᵀλ - c ⪰ 0`, `λ ≥ 0`. Newton systems are reduced to
//! the primal space, `(H + Gᵀ diag(λ/s) G) dx + Eᵀ dy = r`, so the cost per
//! iteration is governed by `n = d(d+1)/2` and not by the number of
//! inequality rows, which can be large for product programs.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use super::SolverConfig;

const STEP_FRACTION: f64 = 0.99;
const DIVERGENCE_LIMIT: f64 = 1e12;
/// Smallest iterate size at which a stall is tested for an unbounded ray.
const RAY_NORM: f64 = 1e6;
const RAY_MIN_SLOPE: f64 = 1e-6;
const RAY_TOL: f64 = 1e-6;
const REFINEMENT_STEPS: usize = 10;
const PD_BACKTRACKS: usize = 20;
const BACKTRACK_FACTOR: f64 = 0.7;

/// Sparse row over svec coordinates.
#[derive(Clone, Debug, Default)]
pub(crate) struct Row {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Row {
    fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| v * x[i]).sum()
    }

    fn axpy_into(&self, c: f64, out: &mut [f64]) {
        for (&i, v) in self.idx.iter().zip(&self.val) {
            out[i] += c * v;
        }
    }
}

/// Problem data in svec coordinates.
pub(crate) struct ConicProblem {
    pub dim: usize,
    pub c: Vec<f64>,
    pub eq: Vec<Row>,
    pub b: Vec<f64>,
    pub ineq: Vec<Row>,
    pub h: Vec<f64>,
    /// Starting value for `X = x0·I`.
    pub x0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Converged,
    MaxIters,
    Infeasible,
    Unbounded,
    /// Factorization or scaling broke down; the last iterate is returned.
    Stalled,
}

pub(crate) struct Iterate {
    pub x: Mat<f64>,
    pub y: Vec<f64>,
    pub lam: Vec<f64>,
    pub iterations: usize,
    pub outcome: Outcome,
}

pub(crate) fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Column-major upper-triangle index of `(i, j)`, `i <= j`.
#[inline]
pub(crate) fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

fn svec_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            pairs.push((i, j));
        }
    }
    pairs
}

pub(crate) fn svec(m: &Mat<f64>) -> Vec<f64> {
    let d = m.nrows();
    svec_pairs(d)
        .into_iter()
        .map(|(i, j)| {
            if i == j {
                m[(i, i)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            }
        })
        .collect()
}

pub(crate) fn smat(v: &[f64], d: usize) -> Mat<f64> {
    let mut m = Mat::zeros(d, d);
    for (p, (i, j)) in svec_pairs(d).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = v[p];
        } else {
            let x = v[p] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    m
}

fn symmetrize(m: &mut Mat<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn mat_dot(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

/// NT scaling `R` with `R⁻¹ X R⁻ᵀ = Rᵀ S R = diag(lambda)`.
struct Scaling {
    r: Mat<f64>,
    r_inv: Mat<f64>,
    lambda: Vec<f64>,
    /// `W⁻¹ = R⁻ᵀ R⁻¹`
    w_inv: Mat<f64>,
}

fn nt_scaling(x: &Mat<f64>, s: &Mat<f64>) -> Option<Scaling> {
    let lx = x.llt(Side::Lower).ok()?.L().to_owned();
    let ls = s.llt(Side::Lower).ok()?.L().to_owned();
    let m = ls.transpose() * &lx;
    let svd = m.svd().ok()?;
    let d = x.nrows();
    let sig: Vec<f64> = (0..d).map(|k| svd.S()[k]).collect();
    if sig.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let inv_sqrt: Vec<f64> = sig.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut r = &lx * svd.V();
    for j in 0..d {
        for i in 0..d {
            r[(i, j)] *= inv_sqrt[j];
        }
    }
    let mut r_inv = svd.U().transpose() * ls.transpose();
    for i in 0..d {
        for j in 0..d {
            r_inv[(i, j)] *= inv_sqrt[i];
        }
    }
    let mut w_inv = r_inv.transpose() * &r_inv;
    symmetrize(&mut w_inv);
    Some(Scaling {
        r,
        r_inv,
        lambda: sig,
        w_inv,
    })
}

impl Scaling {
    /// `R⁻¹ M R⁻ᵀ`
    fn scale_primal(&self, m: &Mat<f64>) -> Mat<f64> {
        let mut out = &self.r_inv * m * self.r_inv.transpose();
        symmetrize(&mut out);
        out
    }

    /// `Rᵀ M R`
    fn scale_dual(&self, m: &Mat<f64>) -> Mat<f64> {
        let mut out = self.r.transpose() * m * &self.r;
        symmetrize(&mut out);
        out
    }

    /// `R⁻ᵀ M R⁻¹`
    fn unscale_dual(&self, m: &Mat<f64>) -> Mat<f64> {
        let mut out = self.r_inv.transpose() * m * &self.r_inv;
        symmetrize(&mut out);
        out
    }
}

/// Largest `α` with `diag(lambda) + α·delta ⪰ 0` (capped at `f64::MAX`).
fn psd_step(lambda: &[f64], delta: &Mat<f64>) -> f64 {
    let d = lambda.len();
    let s: Vec<f64> = lambda.iter().map(|v| 1.0 / v.sqrt()).collect();
    let m = Mat::from_fn(d, d, |i, j| s[i] * delta[(i, j)] * s[j]);
    let ev = match m.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev,
        Err(_) => return 0.0,
    };
    let min = ev.into_iter().fold(f64::INFINITY, f64::min);
    if min >= 0.0 {
        f64::MAX
    } else {
        -1.0 / min
    }
}

/// `M + α·ΔM` for the largest tried `α` whose result still factors, since
/// rounding can push the exact boundary step slightly past it.
fn backtrack_pd(m: &Mat<f64>, dm: &Mat<f64>, alpha: f64) -> (Mat<f64>, f64) {
    let mut alpha = alpha;
    for _ in 0..PD_BACKTRACKS {
        let mut next = m + dm * faer::Scale(alpha);
        symmetrize(&mut next);
        if next.llt(Side::Lower).is_ok() {
            return (next, alpha);
        }
        alpha *= BACKTRACK_FACTOR;
    }
    (m.clone(), 0.0)
}

fn orthant_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(a, d)| -a / d)
        .fold(f64::MAX, f64::min)
}

struct Factorization {
    k: Equilibrated,
    /// `K` with both triangles, for residuals during refinement.
    k_full: Mat<f64>,
    /// `K⁻¹ Eᵀ`, one column per equality row.
    k_inv_et: Mat<f64>,
    schur: Option<Equilibrated>,
}

impl Factorization {
    fn k_times(&self, v: &[f64]) -> Vec<f64> {
        let col = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        let out = &self.k_full * &col;
        (0..v.len()).map(|i| out[(i, 0)]).collect()
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dlam: Vec<f64>,
    ds: Vec<f64>,
    ds_mat: Mat<f64>,
}

struct Residuals {
    rp: Vec<f64>,
    ri: Vec<f64>,
    rd: Vec<f64>,
}

/// Cholesky factor of `D M D` with `D = diag(M)^-½`, so that regularization
/// acts relative to each pivot and not to the largest one.
struct Equilibrated {
    llt: faer::linalg::solvers::Llt<f64>,
    d: Vec<f64>,
}

impl Equilibrated {
    fn new(m: &Mat<f64>) -> Option<Self> {
        let n = m.nrows();
        let d: Vec<f64> = (0..n)
            .map(|i| {
                let v = m[(i, i)].abs();
                if v > 0.0 && v.is_finite() {
                    1.0 / v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scaled = Mat::from_fn(n, n, |i, j| d[i] * m[(i, j)] * d[j]);
        Some(Self {
            llt: llt_with_regularization(&scaled)?,
            d,
        })
    }

    fn solve_in_place(&self, mut rhs: faer::MatMut<'_, f64>) {
        for j in 0..rhs.ncols() {
            for i in 0..rhs.nrows() {
                rhs[(i, j)] *= self.d[i];
            }
        }
        self.llt.solve_in_place(rhs.as_mut());
        for j in 0..rhs.ncols() {
            for i in 0..rhs.nrows() {
                rhs[(i, j)] *= self.d[i];
            }
        }
    }
}

fn llt_with_regularization(m: &Mat<f64>) -> Option<faer::linalg::solvers::Llt<f64>> {
    if let Ok(f) = m.llt(Side::Lower) {
        return Some(f);
    }
    let n = m.nrows();
    let scale = (0..n)
        .map(|i| m[(i, i)].abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut delta = 1e-14 * scale;
    for _ in 0..12 {
        let mut reg = m.clone();
        for i in 0..n {
            reg[(i, i)] += delta;
        }
        if let Ok(f) = reg.llt(Side::Lower) {
            return Some(f);
        }
        delta *= 100.0;
    }
    None
}

impl ConicProblem {
    fn n(&self) -> usize {
        self.c.len()
    }

    fn eq_times(&self, x: &[f64]) -> Vec<f64> {
        self.eq.iter().map(|r| r.dot(x)).collect()
    }

    fn ineq_times(&self, x: &[f64]) -> Vec<f64> {
        self.ineq.iter().map(|r| r.dot(x)).collect()
    }

    fn eq_transpose_times(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (r, v) in self.eq.iter().zip(y) {
            r.axpy_into(*v, &mut out);
        }
        out
    }

    fn ineq_transpose_times(&self, l: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (r, v) in self.ineq.iter().zip(l) {
            r.axpy_into(*v, &mut out);
        }
        out
    }

    fn residuals(
        &self,
        x: &[f64],
        s_mat: &Mat<f64>,
        y: &[f64],
        lam: &[f64],
        s: &[f64],
    ) -> Residuals {
        let ex = self.eq_times(x);
        let gx = self.ineq_times(x);
        let rp = self.b.iter().zip(&ex).map(|(b, v)| b - v).collect();
        let ri = (0..self.h.len())
            .map(|k| self.h[k] - gx[k] - s[k])
            .collect();
        let ety = self.eq_transpose_times(y);
        let gtl = self.ineq_transpose_times(lam);
        let sv = svec(s_mat);
        let rd = (0..self.n())
            .map(|p| self.c[p] - ety[p] - gtl[p] + sv[p])
            .collect();
        Residuals { rp, ri, rd }
    }

    /// `K = H + Gᵀ D G` (lower triangle filled) with `H = W⁻¹ ⊛ W⁻¹`.
    fn assemble(&self, w_inv: &Mat<f64>, dvec: &[f64]) -> Mat<f64> {
        let d = self.dim;
        let pairs = svec_pairs(d);
        let n = pairs.len();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let f: Vec<f64> = pairs
            .iter()
            .map(|&(i, j)| if i == j { half } else { 1.0 })
            .collect();
        let mut k = Mat::<f64>::zeros(n, n);
        for q in 0..n {
            let (kq, lq) = pairs[q];
            for p in q..n {
                let (ip, jp) = pairs[p];
                let t = w_inv[(ip, kq)] * w_inv[(jp, lq)] + w_inv[(ip, lq)] * w_inv[(jp, kq)];
                k[(p, q)] = f[p] * f[q] * t;
            }
        }
        for (row, dk) in self.ineq.iter().zip(dvec) {
            for (a, &ia) in row.idx.iter().enumerate() {
                let va = dk * row.val[a];
                for (b, &ib) in row.idx.iter().enumerate() {
                    if ia >= ib {
                        k[(ia, ib)] += va * row.val[b];
                    }
                }
            }
        }
        k
    }

    fn factor(&self, k: &Mat<f64>) -> Option<Factorization> {
        let k_full = Mat::from_fn(self.n(), self.n(), |i, j| {
            if i >= j {
                k[(i, j)]
            } else {
                k[(j, i)]
            }
        });
        let kf = Equilibrated::new(&k_full)?;
        let n = self.n();
        let m = self.eq.len();
        let mut k_inv_et = Mat::<f64>::zeros(n, m);
        for (col, row) in self.eq.iter().enumerate() {
            for (&i, v) in row.idx.iter().zip(&row.val) {
                k_inv_et[(i, col)] = *v;
            }
        }
        kf.solve_in_place(k_inv_et.as_mut());
        let schur = if m > 0 {
            let mut s = Mat::<f64>::zeros(m, m);
            for (r, row) in self.eq.iter().enumerate() {
                for c in 0..m {
                    s[(r, c)] = row
                        .idx
                        .iter()
                        .zip(&row.val)
                        .map(|(&i, v)| v * k_inv_et[(i, c)])
                        .sum();
                }
            }
            symmetrize(&mut s);
            Some(Equilibrated::new(&s)?)
        } else {
            None
        };
        Some(Factorization {
            k: kf,
            k_full,
            k_inv_et,
            schur,
        })
    }

    /// Solves `K dx + Eᵀ dy = rhs,  E dx = rp` by block elimination, then
    /// refines against the unregularized `K`.
    fn solve_kkt(&self, fact: &Factorization, rhs: &[f64], rp: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let residual = |dx: &[f64], dy: &[f64]| {
            let kdx = fact.k_times(dx);
            let ety = self.eq_transpose_times(dy);
            let r1: Vec<f64> = (0..dx.len()).map(|p| rhs[p] - kdx[p] - ety[p]).collect();
            let edx = self.eq_times(dx);
            let r2: Vec<f64> = rp.iter().zip(&edx).map(|(a, b)| a - b).collect();
            (r1, r2)
        };
        let size = |(r1, r2): &(Vec<f64>, Vec<f64>)| norm(r1).max(norm(r2));
        let (mut dx, mut dy) = self.eliminate(fact, rhs, rp);
        let mut res = residual(&dx, &dy);
        // A regularized factor can make refinement diverge, so a step is
        // kept only when it shrinks the residual.
        for _ in 0..REFINEMENT_STEPS {
            let (cx, cy) = self.eliminate(fact, &res.0, &res.1);
            let nx: Vec<f64> = dx.iter().zip(&cx).map(|(a, c)| a + c).collect();
            let ny: Vec<f64> = dy.iter().zip(&cy).map(|(a, c)| a + c).collect();
            let next = residual(&nx, &ny);
            if size(&next).is_nan() || size(&next) >= 0.5 * size(&res) {
                if size(&next) < size(&res) {
                    (dx, dy) = (nx, ny);
                }
                break;
            }
            (dx, dy, res) = (nx, ny, next);
        }
        (dx, dy)
    }

    fn eliminate(&self, fact: &Factorization, rhs: &[f64], rp: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut k_inv_rhs = Mat::from_fn(n, 1, |i, _| rhs[i]);
        fact.k.solve_in_place(k_inv_rhs.as_mut());
        let m = self.eq.len();
        let dy: Vec<f64> = match &fact.schur {
            Some(schur) => {
                let mut t = Mat::from_fn(m, 1, |r, _| {
                    let row = &self.eq[r];
                    let v: f64 = row
                        .idx
                        .iter()
                        .zip(&row.val)
                        .map(|(&i, a)| a * k_inv_rhs[(i, 0)])
                        .sum();
                    v - rp[r]
                });
                schur.solve_in_place(t.as_mut());
                (0..m).map(|r| t[(r, 0)]).collect()
            }
            None => Vec::new(),
        };
        let dx: Vec<f64> = (0..n)
            .map(|p| k_inv_rhs[(p, 0)] - (0..m).map(|r| fact.k_inv_et[(p, r)] * dy[r]).sum::<f64>())
            .collect();
        (dx, dy)
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        fact: &Factorization,
        scaling: &Scaling,
        w: &[f64],
        dvec: &[f64],
        res: &Residuals,
        q_psd: &Mat<f64>,
        q_lin: &[f64],
    ) -> Direction {
        let d = self.dim;
        let n = self.n();
        let q_unscaled = scaling.unscale_dual(q_psd);
        let qv = svec(&q_unscaled);
        // rhs = r_d + Q - Gᵀ(q/w) + Gᵀ D r_i
        let corr: Vec<f64> = (0..self.ineq.len())
            .map(|k| dvec[k] * res.ri[k] - q_lin[k] / w[k])
            .collect();
        let gt = self.ineq_transpose_times(&corr);
        let rhs: Vec<f64> = (0..n).map(|p| res.rd[p] + qv[p] + gt[p]).collect();

        let (dx, dy) = self.solve_kkt(fact, &rhs, &res.rp);
        let gdx = self.ineq_times(&dx);
        let ds: Vec<f64> = (0..self.ineq.len()).map(|k| res.ri[k] - gdx[k]).collect();
        let dlam: Vec<f64> = (0..self.ineq.len())
            .map(|k| q_lin[k] / w[k] - dvec[k] * ds[k])
            .collect();
        // dS from the linearized dual equation, so dual infeasibility
        // shrinks exactly with the step even when the solve is inaccurate.
        let ety = self.eq_transpose_times(&dy);
        let gtl = self.ineq_transpose_times(&dlam);
        let dsv: Vec<f64> = (0..n).map(|p| ety[p] + gtl[p] - res.rd[p]).collect();
        let ds_mat = smat(&dsv, d);
        Direction {
            dx,
            dy,
            dlam,
            ds,
            ds_mat,
        }
    }
}

/// Cheap convergence measures on the current iterate.
struct Progress {
    pobj: f64,
    dobj: f64,
    primal_violation: f64,
    dual_residual: f64,
}

fn progress(p: &ConicProblem, x: &[f64], y: &[f64], lam: &[f64], rd: &[f64]) -> Progress {
    let pobj = dot(&p.c, x);
    let dobj = dot(&p.b, y) + dot(&p.h, lam);
    let ex = p.eq_times(x);
    let gx = p.ineq_times(x);
    let eq_viol = ex
        .iter()
        .zip(&p.b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let in_viol = gx.iter().zip(&p.h).map(|(a, b)| a - b).fold(0.0, f64::max);
    Progress {
        pobj,
        dobj,
        primal_violation: eq_viol.max(in_viol),
        dual_residual: norm(rd),
    }
}

fn converged(pr: &Progress, cfg: &SolverConfig) -> bool {
    pr.primal_violation <= cfg.feas_tol
        && pr.dual_residual <= cfg.feas_tol
        && (pr.pobj - pr.dobj).abs() <= cfg.gap_tol * (1.0 + pr.pobj.abs())
}

/// Whether a stalled iterate has run off along an improving primal ray: the
/// normalised iterate `X/‖X‖` satisfies the homogeneous constraints to within
/// `RAY_TOL` and still has a clearly positive objective.
fn is_primal_ray(p: &ConicProblem, x_mat: &Mat<f64>) -> bool {
    let x = svec(x_mat);
    let x_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !x_norm.is_finite() || x_norm < RAY_NORM {
        return false;
    }
    let d: Vec<f64> = x.iter().map(|v| v / x_norm).collect();
    let eq = p.eq_times(&d).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ineq = p.ineq_times(&d).iter().fold(0.0f64, |m, v| m.max(*v));
    eq <= RAY_TOL && ineq <= RAY_TOL && dot(&p.c, &d) >= RAY_MIN_SLOPE
}

/// Runs the interior point iteration. `accept` is consulted whenever the
/// cheap convergence test passes; returning `false` keeps iterating.
pub(crate) fn run(
    p: &ConicProblem,
    cfg: &SolverConfig,
    mut accept: impl FnMut(&Mat<f64>, &Mat<f64>, &[f64], &[f64]) -> bool,
) -> Iterate {
    let d = p.dim;
    let mi = p.ineq.len();
    let mut x_mat = Mat::<f64>::identity(d, d) * faer::Scale(p.x0);
    let mut s_mat = Mat::<f64>::identity(d, d);
    let mut y = vec![0.0; p.eq.len()];
    let mut lam = vec![1.0; mi];
    let mut s = vec![1.0; mi];
    let cone_dim = (d + mi) as f64;

    let finish =
        |x_mat: Mat<f64>, _s_mat: Mat<f64>, y: Vec<f64>, lam: Vec<f64>, it: usize, outcome| {
            let outcome = match outcome {
                Outcome::Stalled | Outcome::MaxIters if is_primal_ray(p, &x_mat) => {
                    Outcome::Unbounded
                }
                o => o,
            };
            Iterate {
                x: x_mat,
                y,
                lam,
                iterations: it,
                outcome,
            }
        };

    for it in 0..cfg.max_iters {
        let x = svec(&x_mat);
        let res = p.residuals(&x, &s_mat, &y, &lam, &s);
        let pr = progress(p, &x, &y, &lam, &res.rd);
        if converged(&pr, cfg) && accept(&x_mat, &s_mat, &y, &lam) {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Converged);
        }
        if !pr.pobj.is_finite() || !pr.dobj.is_finite() {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Stalled);
        }
        let x_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dual_norm = y.iter().chain(&lam).fold(0.0f64, |m, v| m.max(v.abs()));
        if pr.pobj > DIVERGENCE_LIMIT || x_norm > DIVERGENCE_LIMIT {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Unbounded);
        }
        if pr.dobj < -DIVERGENCE_LIMIT || dual_norm > DIVERGENCE_LIMIT {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Infeasible);
        }

        let Some(scaling) = nt_scaling(&x_mat, &s_mat) else {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Stalled);
        };
        let w: Vec<f64> = (0..mi).map(|k| (s[k] / lam[k]).sqrt()).collect();
        let dvec: Vec<f64> = (0..mi).map(|k| lam[k] / s[k]).collect();
        let lin: Vec<f64> = (0..mi).map(|k| (s[k] * lam[k]).sqrt()).collect();
        let mu = (scaling.lambda.iter().map(|v| v * v).sum::<f64>() + dot(&s, &lam)) / cone_dim;

        let k = p.assemble(&scaling.w_inv, &dvec);
        let Some(fact) = p.factor(&k) else {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Stalled);
        };

        // Predictor.
        let q_aff = Mat::from_fn(d, d, |i, j| if i == j { -scaling.lambda[i] } else { 0.0 });
        let ql_aff: Vec<f64> = lin.iter().map(|v| -v).collect();
        let aff = p.direction(&fact, &scaling, &w, &dvec, &res, &q_aff, &ql_aff);
        let dxs_aff = scaling.scale_primal(&smat(&aff.dx, d));
        let dzs_aff = scaling.scale_dual(&aff.ds_mat);
        let ap = psd_step(&scaling.lambda, &dxs_aff)
            .min(orthant_step(&s, &aff.ds))
            .min(1.0);
        let ad = psd_step(&scaling.lambda, &dzs_aff)
            .min(orthant_step(&lam, &aff.dlam))
            .min(1.0);
        let lam_mat = Mat::from_fn(d, d, |i, j| if i == j { scaling.lambda[i] } else { 0.0 });
        let xs_aff = mat_dot(
            &(&lam_mat + &dxs_aff * faer::Scale(ap)),
            &(&lam_mat + &dzs_aff * faer::Scale(ad)),
        );
        let lin_aff: f64 = (0..mi)
            .map(|k| (s[k] + ap * aff.ds[k]) * (lam[k] + ad * aff.dlam[k]))
            .sum();
        let mu_aff = ((xs_aff + lin_aff) / cone_dim).max(0.0);
        // Short affine steps mean poor centrality, so the exponent drops to 1.
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = (mu_aff / mu).powf(expon).clamp(0.0, 1.0);

        // Corrector: Λ∘(Δŝ + Δẑ) = σμI - Λ² - Δŝ_a∘Δẑ_a.
        let prod = &dxs_aff * &dzs_aff;
        let q_cc = Mat::from_fn(d, d, |i, j| {
            let jordan = 0.5 * (prod[(i, j)] + prod[(j, i)]);
            let target = if i == j {
                sigma * mu - scaling.lambda[i] * scaling.lambda[i]
            } else {
                0.0
            };
            2.0 * (target - jordan) / (scaling.lambda[i] + scaling.lambda[j])
        });
        let ql_cc: Vec<f64> = (0..mi)
            .map(|k| (sigma * mu - lin[k] * lin[k] - aff.ds[k] * aff.dlam[k]) / lin[k])
            .collect();
        let dir = p.direction(&fact, &scaling, &w, &dvec, &res, &q_cc, &ql_cc);
        let dxs = scaling.scale_primal(&smat(&dir.dx, d));
        let dzs = scaling.scale_dual(&dir.ds_mat);
        let ap = (STEP_FRACTION * psd_step(&scaling.lambda, &dxs).min(orthant_step(&s, &dir.ds)))
            .min(1.0);
        let ad = (STEP_FRACTION
            * psd_step(&scaling.lambda, &dzs).min(orthant_step(&lam, &dir.dlam)))
        .min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Stalled);
        }

        let (x_next, ap) = backtrack_pd(&x_mat, &smat(&dir.dx, d), ap);
        let (s_next, ad) = backtrack_pd(&s_mat, &dir.ds_mat, ad);
        if ap == 0.0 && ad == 0.0 {
            return finish(x_mat, s_mat, y, lam, it, Outcome::Stalled);
        }
        (x_mat, s_mat) = (x_next, s_next);
        for (v, dv) in s.iter_mut().zip(&dir.ds) {
            *v += ap * dv;
        }
        for (v, dv) in y.iter_mut().zip(&dir.dy) {
            *v += ad * dv;
        }
        for (v, dv) in lam.iter_mut().zip(&dir.dlam) {
            *v += ad * dv;
        }
    }
    let x = svec(&x_mat);
    let res = p.residuals(&x, &s_mat, &y, &lam, &s);
    let pr = progress(p, &x, &y, &lam, &res.rd);
    let outcome = if converged(&pr, cfg) && accept(&x_mat, &s_mat, &y, &lam) {
        Outcome::Converged
    } else {
        Outcome::MaxIters
    };
    let iters = cfg.max_iters;
    finish(x_mat, s_mat, y, lam, iters, outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_and_inner_product() {
        let a = Mat::from_fn(3, 3, |i, j| (i + j) as f64 + if i == j { 1.0 } else { 0.5 });
        let b = Mat::from_fn(3, 3, |i, j| (i * j) as f64 - 1.0);
        let back = smat(&svec(&a), 3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-14);
            }
        }
        let direct = mat_dot(&a, &b);
        assert!((dot(&svec(&a), &svec(&b)) - direct).abs() < 1e-12);
        assert_eq!(svec_index(1, 2), svec_index(2, 1));
        assert_eq!(svec_index(2, 2), 5);
    }

    #[test]
    fn nt_scaling_identities() {
        let x = Mat::from_fn(3, 3, |i, j| if i == j { 2.0 + i as f64 } else { 0.3 });
        let s = Mat::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.2 });
        let sc = nt_scaling(&x, &s).unwrap();
        let xs = sc.scale_primal(&x);
        let ss = sc.scale_dual(&s);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { sc.lambda[i] } else { 0.0 };
                assert!((xs[(i, j)] - want).abs() < 1e-12);
                assert!((ss[(i, j)] - want).abs() < 1e-12);
            }
        }
        // W⁻¹ X W⁻¹ = S
        let wxw = &sc.w_inv * &x * &sc.w_inv;
        for i in 0..3 {
            for j in 0..3 {
                assert!((wxw[(i, j)] - s[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn assembled_hessian_matches_operator() {
        // H svec(D) = svec(W⁻¹ D W⁻¹)
        let d = 3;
        let w_inv = Mat::from_fn(d, d, |i, j| {
            if i == j {
                2.0
            } else {
                0.4 + 0.1 * (i + j) as f64
            }
        });
        let p = ConicProblem {
            dim: d,
            c: vec![0.0; svec_len(d)],
            eq: vec![],
            b: vec![],
            ineq: vec![],
            h: vec![],
            x0: 1.0,
        };
        let k = p.assemble(&w_inv, &[]);
        let dm = Mat::from_fn(d, d, |i, j| ((i + 1) * (j + 2) + (j + 1) * (i + 2)) as f64);
        let dv = svec(&dm);
        let n = dv.len();
        let hv: Vec<f64> = (0..n)
            .map(|p| {
                (0..n)
                    .map(|q| if p >= q { k[(p, q)] } else { k[(q, p)] } * dv[q])
                    .sum()
            })
            .collect();
        let want = svec(&(&w_inv * &dm * &w_inv));
        for (a, b) in hv.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
