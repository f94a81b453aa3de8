//! Lawson–Hanson active-set non-negative least squares.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsResult {
    pub coeffs: Vec<f64>,
    /// Euclidean norm of `target - Σ coeffs[k]·columns[k]`.
    pub residual: f64,
}

/// `min ‖Σ c_k·columns[k] - target‖` over `c ≥ 0`.
pub fn nnls(columns: &[Vec<f64>], target: &[f64]) -> Result<NnlsResult> {
    let m = target.len();
    if let Some((k, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "column {k} has length {}, target has length {m}",
            c.len()
        )));
    }
    let n = columns.len();
    let scale = columns
        .iter()
        .flatten()
        .chain(target)
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1.0);
    let tol = 10.0 * f64::EPSILON * scale * scale * (m.max(n) as f64);

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let gradient = |x: &[f64]| -> Vec<f64> {
        let r = residual_vector(columns, target, x);
        columns.iter().map(|c| dot(c, &r)).collect()
    };

    let mut w = gradient(&x);
    for _outer in 0..3 * n.max(1) {
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _inner in 0..3 * n.max(1) {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = least_squares(columns, target, &idx);
            if idx.iter().zip(&z).all(|(_, v)| *v > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&k, v) in idx.iter().zip(&z) {
                    x[k] = *v;
                }
                break;
            }
            let alpha = idx
                .iter()
                .zip(&z)
                .filter(|(_, v)| **v <= 0.0)
                .map(|(&k, v)| x[k] / (x[k] - v))
                .fold(f64::INFINITY, f64::min);
            let mut full = vec![0.0; n];
            for (&k, v) in idx.iter().zip(&z) {
                full[k] = *v;
            }
            for k in 0..n {
                x[k] += alpha * (full[k] - x[k]);
                if passive[k] && x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
        w = gradient(&x);
    }
    let residual = dot_self(&residual_vector(columns, target, &x)).sqrt();
    Ok(NnlsResult {
        coeffs: x,
        residual,
    })
}

fn least_squares(columns: &[Vec<f64>], target: &[f64], idx: &[usize]) -> Vec<f64> {
    let m = target.len();
    let a = Mat::from_fn(m, idx.len(), |i, j| columns[idx[j]][i]);
    let mut rhs = Mat::from_fn(m, 1, |i, _| target[i]);
    if m >= idx.len() {
        a.col_piv_qr().solve_lstsq_in_place(rhs.as_mut());
        (0..idx.len()).map(|k| rhs[(k, 0)]).collect()
    } else {
        // Underdetermined: the minimum-norm solution via the SVD.
        let svd = a.svd().expect("svd of a small dense matrix");
        let mut out = Mat::zeros(idx.len(), 1);
        let s = svd.S();
        let cutoff = s[0].abs() * 1e-12 * m as f64;
        for k in 0..m.min(idx.len()) {
            if s[k] > cutoff {
                let coef: f64 = (0..m).map(|i| svd.U()[(i, k)] * rhs[(i, 0)]).sum::<f64>() / s[k];
                for r in 0..idx.len() {
                    out[(r, 0)] += coef * svd.V()[(r, k)];
                }
            }
        }
        rhs = out;
        (0..idx.len()).map(|k| rhs[(k, 0)]).collect()
    }
}

fn residual_vector(columns: &[Vec<f64>], target: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = target.to_vec();
    for (c, xk) in columns.iter().zip(x) {
        if *xk != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= xk * ci;
            }
        }
    }
    r
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_self(a: &[f64]) -> f64 {
    dot(a, a)
}
