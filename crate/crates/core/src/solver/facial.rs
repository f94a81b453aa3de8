//! Facial reduction, used when the interior point method stalls on a program
//! whose feasible set has no positive definite point.
//!
//! An auxiliary program finds `y`, `z ≥ 0` with `S = Σ y_k A_k - Σ z_k B_k ⪰ 0`
//! and `bᵀy = 0` (equality rows only). Every feasible `X` then satisfies
//! `S • X = 0`, so `X = Q Ŷ Qᵀ` where `Q` spans the kernel of `S`. The
//! program is restated over `Ŷ`, dependent equality rows are dropped, and
//! the reduced solution is lifted back. The lifted dual adds a multiple of
//! the certificate, which is PSD off the face.

use faer::Mat;

use crate::linalg::{eigen, SparseMatrix, SymMatrix};
use crate::model::{Relation, SdpProgram};

use super::{
    measure, meets_postconditions, solve_at_depth, solve_direct, SolveReport, SolverConfig, Status,
};

/// The auxiliary program is well posed, so it is always solved tightly.
const AUX_TOL: f64 = 1e-9;
/// Certificate eigenvalues below this fraction of the largest span the face.
const FACE_RANK_TOL: f64 = 1e-6;
/// Smallest certificate eigenvalue that counts as a reduction.
const MIN_CERTIFICATE: f64 = 1e-6;
/// `|bᵀy|` allowed on the certificate, and rhs mismatch allowed on dropped rows.
const CONSISTENCY_TOL: f64 = 1e-6;
/// Relative Gram–Schmidt residual under which a reduced row is dependent.
const DEPENDENCE_TOL: f64 = 1e-9;
/// Reduced matrix entries below this are rounding noise.
const ENTRY_EPS: f64 = 1e-14;
/// Certificate multiples tried when repairing the lifted dual.
const MULTIPLIER_START: f64 = 1e-4;
const MULTIPLIER_GROWTH: f64 = 4.0;
const MULTIPLIER_MAX: f64 = 1e12;

/// `max -t  s.t.  A_k • X - tr(A_k)·t = b_k,  B_k • X - tr(B_k)·t >= 0`
/// over `diag(X, t) ⪰ 0`. `X₀ + t·I` is strictly feasible for any feasible
/// `X₀`, and the dual is the certificate search with `tr S <= 1`.
fn auxiliary(p: &SdpProgram, eq_rows: &[usize]) -> SdpProgram {
    let d = p.dim;
    let embed = |m: &SparseMatrix| {
        let mut t = m.entries().to_vec();
        let tr: f64 = t.iter().filter(|e| e.0 == e.1).map(|e| e.2).sum();
        if tr != 0.0 {
            t.push((d, d, -tr));
        }
        SparseMatrix::from_triplets(d + 1, d + 1, t).expect("embedded indices in range")
    };
    let mut j = SymMatrix::zeros(d + 1);
    j.set(d, d, -1.0);
    let mut aux = SdpProgram::new(j);
    for &k in eq_rows {
        let c = &p.constraints[k];
        aux.add_eq(embed(&c.matrix), c.rhs);
    }
    for b in &p.nonneg {
        aux.add_nonneg(embed(b));
    }
    aux
}

fn dense(m: &SparseMatrix, d: usize) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(d, d);
    for &(i, j, v) in m.entries() {
        out[(i, j)] += v;
    }
    out
}

/// `Qᵀ M Q`, exactly symmetric.
fn congruence(q: &Mat<f64>, m: &Mat<f64>) -> Mat<f64> {
    let r = q.transpose() * m * q;
    let k = r.nrows();
    Mat::from_fn(k, k, |i, j| 0.5 * (r[(i, j)] + r[(j, i)]))
}

fn sparse(m: &Mat<f64>) -> SparseMatrix {
    let k = m.nrows();
    let entries = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m[(i, j)]))
        .filter(|e| e.2.abs() > ENTRY_EPS);
    SparseMatrix::from_triplets(k, k, entries).expect("reduced indices in range")
}

fn flat(m: &Mat<f64>) -> Vec<f64> {
    (0..m.ncols())
        .flat_map(|j| (0..m.nrows()).map(move |i| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares coefficients of `v` on the columns `cols`, through
/// lightly regularized normal equations.
fn least_squares(cols: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = cols.len();
    if n == 0 {
        return Vec::new();
    }
    let mut g = Mat::from_fn(n, n, |a, b| dot(&cols[a], &cols[b]));
    let scale = (0..n).map(|i| g[(i, i)]).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        g[(i, i)] += 1e-13 * scale;
    }
    let rhs = Mat::from_fn(n, 1, |a, _| dot(&cols[a], v));
    match g.llt(faer::Side::Lower) {
        Ok(f) => {
            let sol = faer::linalg::solvers::Solve::solve(&f, &rhs);
            (0..n).map(|i| sol[(i, 0)]).collect()
        }
        Err(_) => vec![0.0; n],
    }
}

/// A reduced program with the bookkeeping needed to lift its solution.
struct Reduction {
    program: SdpProgram,
    /// Face basis, `d × k`.
    q: Mat<f64>,
    /// Original row index of each reduced constraint row.
    rows: Vec<usize>,
    /// Original index of each reduced non-negativity row.
    nonneg: Vec<usize>,
    /// Dropped equality rows `i` with `w = e_i - Σ c_j e_{kept_j}` in
    /// original row coordinates; `Σ w_k A_k` vanishes on the face.
    null_dirs: Vec<(usize, Vec<f64>)>,
    /// Certificate `(y, z)` in original coordinates.
    cert_y: Vec<f64>,
    cert_z: Vec<f64>,
}

fn reduce(p: &SdpProgram, cfg: &SolverConfig) -> Option<(Reduction, usize)> {
    let d = p.dim;
    let eq_rows: Vec<usize> = (0..p.constraints.len())
        .filter(|&k| p.constraints[k].relation == Relation::Eq)
        .collect();
    if eq_rows.is_empty() {
        return None;
    }
    let aux_cfg = SolverConfig {
        gap_tol: cfg.gap_tol.min(AUX_TOL),
        feas_tol: cfg.feas_tol.min(AUX_TOL),
        ..cfg.clone()
    };
    let aux = solve_direct(&auxiliary(p, &eq_rows), &aux_cfg).ok()?;
    if !aux.is_optimal() || aux.solution.dual_value.abs() > CONSISTENCY_TOL {
        return None;
    }
    let mut cert_y = vec![0.0; p.constraints.len()];
    for (&k, v) in eq_rows.iter().zip(&aux.solution.y) {
        cert_y[k] = *v;
    }
    let cert_z = aux.solution.z.clone();
    let mut s = SymMatrix::zeros(d);
    for (c, v) in p.constraints.iter().zip(&cert_y) {
        c.matrix.add_scaled_into(*v, &mut s);
    }
    for (b, v) in p.nonneg.iter().zip(&cert_z) {
        b.add_scaled_into(-*v, &mut s);
    }
    let e = eigen(&s).ok()?;
    let top = e.max_eigenvalue();
    if top < MIN_CERTIFICATE {
        return None;
    }
    let k = e
        .eigenvalues
        .iter()
        .filter(|v| **v <= FACE_RANK_TOL * top)
        .count();
    if k == 0 {
        return None;
    }
    let q = Mat::from_fn(d, k, |i, j| e.eigenvectors.get(i, j));

    let j = p.objective_sym();
    let jm = Mat::from_fn(d, d, |a, b| j.get(a, b));
    let jr = congruence(&q, &jm);
    let mut program = SdpProgram::new(SymMatrix::from_upper(k, |a, b| jr[(a, b)]));
    let mut rows = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept_flat: Vec<Vec<f64>> = Vec::new();
    let mut kept_rows: Vec<usize> = Vec::new();
    let mut dropped: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, c) in p.constraints.iter().enumerate() {
        let m = congruence(&q, &dense(&c.matrix, d));
        if c.relation == Relation::Le {
            program.add_le(sparse(&m), c.rhs);
            rows.push(idx);
            continue;
        }
        let v = flat(&m);
        let norm = dot(&v, &v).sqrt();
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let t = dot(&r, b);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= t * y);
            }
        }
        let rn = dot(&r, &r).sqrt();
        if rn > DEPENDENCE_TOL * norm.max(1.0) {
            basis.push(r.iter().map(|x| x / rn).collect());
            kept_flat.push(v);
            kept_rows.push(idx);
            program.add_eq(sparse(&m), c.rhs);
            rows.push(idx);
        } else {
            dropped.push((idx, v));
        }
    }
    let mut null_dirs = Vec::new();
    for (idx, v) in dropped {
        let coef = least_squares(&kept_flat, &v);
        let implied: f64 = coef
            .iter()
            .zip(&kept_rows)
            .map(|(c, &r)| c * p.constraints[r].rhs)
            .sum();
        if (p.constraints[idx].rhs - implied).abs()
            > CONSISTENCY_TOL * (1.0 + p.constraints[idx].rhs.abs())
        {
            return None;
        }
        let mut w = vec![0.0; p.constraints.len()];
        w[idx] = 1.0;
        for (c, &r) in coef.iter().zip(&kept_rows) {
            w[r] -= c;
        }
        null_dirs.push((idx, w));
    }
    let mut nonneg = Vec::new();
    for (idx, b) in p.nonneg.iter().enumerate() {
        let m = congruence(&q, &dense(b, d));
        if (0..k).any(|a| (0..k).any(|c| m[(a, c)].abs() > ENTRY_EPS)) {
            program.add_nonneg(sparse(&m));
            nonneg.push(idx);
        }
    }
    let red = Reduction {
        program,
        q,
        rows,
        nonneg,
        null_dirs,
        cert_y,
        cert_z,
    };
    Some((red, aux.iterations))
}

/// `Σ y_k A_k - Σ z_k B_k` as a dense matrix.
fn combination(p: &SdpProgram, y: &[f64], z: &[f64]) -> Mat<f64> {
    let mut s = Mat::<f64>::zeros(p.dim, p.dim);
    for (c, v) in p.constraints.iter().zip(y) {
        for &(i, j, a) in c.matrix.entries() {
            s[(i, j)] += v * a;
        }
    }
    for (b, v) in p.nonneg.iter().zip(z) {
        for &(i, j, a) in b.entries() {
            s[(i, j)] -= v * a;
        }
    }
    s
}

/// Reduces `p` onto the face exposed by an auxiliary certificate, solves the
/// reduced program and lifts the result. `None` when no reduction applies
/// or the lifted point misses the postconditions.
pub(super) fn solve_reduced(
    p: &SdpProgram,
    cfg: &SolverConfig,
    depth: usize,
) -> Option<SolveReport> {
    let (red, aux_iters) = reduce(p, cfg)?;
    let inner = solve_at_depth(&red.program, cfg, depth + 1).ok()?;
    if !inner.is_optimal() {
        return None;
    }
    let iterations = aux_iters + inner.iterations;
    let q = &red.q;
    let d = p.dim;

    let yr = inner.solution.x.to_matrix();
    let yr = Mat::from_fn(yr.rows(), yr.cols(), |i, j| yr.get(i, j));
    let xm = q * &yr * q.transpose();
    let x = SymMatrix::from_upper(d, |i, j| 0.5 * (xm[(i, j)] + xm[(j, i)]));

    let mut y = vec![0.0; p.constraints.len()];
    for (&r, v) in red.rows.iter().zip(&inner.solution.y) {
        y[r] = *v;
    }
    let mut z = vec![0.0; p.nonneg.len()];
    for (&r, v) in red.nonneg.iter().zip(&inner.solution.z) {
        z[r] = *v;
    }

    // Off the face, the complement of `Q` is spanned by the certificate's
    // range. Cancel what the dropped rows can of the cross block.
    let pc = {
        let cert = combination(p, &red.cert_y, &red.cert_z);
        let sym = SymMatrix::from_upper(d, |i, j| 0.5 * (cert[(i, j)] + cert[(j, i)]));
        let e = eigen(&sym).ok()?;
        let k = q.ncols();
        Mat::from_fn(d, d - k, |i, j| e.eigenvectors.get(i, k + j))
    };
    let jm = {
        let j = p.objective_sym();
        Mat::from_fn(d, d, |a, b| j.get(a, b))
    };
    let cross = |m: &Mat<f64>| flat(&(q.transpose() * m * &pc));
    let c0 = cross(&(combination(p, &y, &z) - &jm));
    let cols: Vec<Vec<f64>> = red
        .null_dirs
        .iter()
        .map(|(_, w)| cross(&combination(p, w, &vec![0.0; p.nonneg.len()])))
        .collect();
    let neg: Vec<f64> = c0.iter().map(|v| -v).collect();
    let alpha = least_squares(&cols, &neg);
    for (a, (_, w)) in alpha.iter().zip(&red.null_dirs) {
        y.iter_mut().zip(w).for_each(|(t, v)| *t += a * v);
    }

    // Certificate direction, with its equality part moved into the span of
    // the dropped-row directions so that `bᵀ` of it is rounding noise.
    let z_scale = red.cert_z.iter().fold(0.0f64, |m, v| m.max(*v));
    let y_scale = red.cert_y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (dir_y, dir_z) = if z_scale <= 1e-8 * y_scale {
        let mut dy = vec![0.0; p.constraints.len()];
        for (i, w) in &red.null_dirs {
            let i = *i;
            dy.iter_mut()
                .zip(w)
                .for_each(|(t, v)| *t += red.cert_y[i] * v);
        }
        (dy, vec![0.0; p.nonneg.len()])
    } else {
        (red.cert_y.clone(), red.cert_z.clone())
    };

    let mut t = 0.0;
    while t <= MULTIPLIER_MAX {
        let yt: Vec<f64> = y.iter().zip(&dir_y).map(|(a, b)| a + t * b).collect();
        let zt: Vec<f64> = z.iter().zip(&dir_z).map(|(a, b)| a + t * b).collect();
        let (solution, gap) = measure(p, &x, &yt, &zt).ok()?;
        if meets_postconditions(&solution, gap, cfg) {
            return Some(SolveReport {
                solution,
                status: Status::Optimal,
                iterations,
            });
        }
        t = if t == 0.0 {
            MULTIPLIER_START
        } else {
            t * MULTIPLIER_GROWTH
        };
    }
    None
}
