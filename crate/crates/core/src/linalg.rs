//! Dense and sparse real matrix kernel.
//!
//! Everything here is small-scale and dense except [`SparseMatrix`], which
//! carries constraint matrices: a tensor product of two programs with a few
//! hundred rows each would otherwise hold tens of thousands of mostly-zero
//! 64x64 blocks.

use std::fmt;

use crate::error::{dim_mismatch, Error, Result};

/// Default tolerance for [`is_psd`].
pub const DEFAULT_PSD_TOL: f64 = 1e-9;
/// Default per-entry tolerance for eigendecomposition reconstruction checks.
pub const DEFAULT_RECONSTRUCTION_TOL: f64 = 1e-10;
/// Sweep cap for the cyclic Jacobi eigensolver.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense real matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data; fails if the length is wrong or
    /// any entry is not finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite matrix entry {bad}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(dim_mismatch("matmul", self.shape(), other.shape()));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Exact symmetry test (bit-level equality of mirrored entries).
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:10.4}", self.get(i, j)))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

/// Dense real symmetric matrix. Every constructor guarantees
/// `get(i, j) == get(j, i)` bit for bit.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Builds from the upper triangle of `f`; `f(i, j)` is only evaluated for
    /// `i <= j`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// `(A + Aᵀ) / 2` of a square matrix.
    pub fn symmetrize(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cannot symmetrize a {}x{} matrix",
                a.rows, a.cols
            )));
        }
        Ok(Self::from_upper(a.rows, |i, j| {
            0.5 * (a.get(i, j) + a.get(j, i))
        }))
    }

    /// Accepts `a` only if it is exactly symmetric.
    pub fn try_from_matrix(a: &Matrix) -> Result<Self> {
        if !a.is_symmetric() {
            return Err(Error::InvalidInput("matrix is not symmetric".into()));
        }
        Ok(Self {
            dim: a.rows,
            data: a.data.clone(),
        })
    }

    /// `v vᵀ`
    pub fn outer(v: &[f64]) -> Self {
        Self::from_upper(v.len(), |i, j| v[i] * v[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Adds `v` to `(i, j)` and, off the diagonal, to `(j, i)`.
    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
        if i != j {
            self.data[j * self.dim + i] += v;
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.data.clone(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SymMatrix> {
        if self.dim != other.dim {
            return Err(dim_mismatch(
                "symmetric add",
                (self.dim, self.dim),
                (other.dim, other.dim),
            ));
        }
        Ok(SymMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal_submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_upper(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sym{:?}", self.to_matrix())
    }
}

/// Sparse real matrix stored as row-major sorted `(i, j, value)` triples with
/// no duplicates and no explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    /// Sums duplicate positions and drops entries that end up exactly zero.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut raw: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, v) in &raw {
            if i >= rows || j >= cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite entry {v} at ({i}, {j})"
                )));
            }
        }
        raw.sort_by_key(|&(i, j, _)| (i, j));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(raw.len());
        for (i, j, v) in raw {
            match entries.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => entries.push((i, j, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    /// Symmetric triples: every `(i, j, v)` with `i != j` is mirrored to
    /// `(j, i, v)`. Duplicated positions are summed.
    pub fn from_symmetric_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut all = Vec::new();
        for (i, j, v) in triplets {
            all.push((i, j, v));
            if i != j {
                all.push((j, i, v));
            }
        }
        Self::from_triplets(dim, dim, all)
    }

    /// `(E_ij + E_ji) / 2`, or `E_ii` on the diagonal: the symmetric matrix
    /// whose inner product with a symmetric X is `X[i][j]`.
    pub fn entry_mask(dim: usize, i: usize, j: usize) -> Self {
        let triplets = if i == j {
            vec![(i, i, 1.0)]
        } else {
            vec![(i, j, 0.5), (j, i, 0.5)]
        };
        Self::from_triplets(dim, dim, triplets).expect("mask indices in range")
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rows: dim,
            cols: dim,
            entries: (0..dim).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn from_dense(a: &Matrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let v = a.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self {
            rows: a.rows(),
            cols: a.cols(),
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
            .map_or(0.0, |k| self.entries[k].2)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m.set(i, j, v);
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.entries.iter().all(|&(i, j, v)| self.get(j, i) == v)
    }

    pub fn scale(&self, c: f64) -> SparseMatrix {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.2 *= c;
        }
        out.entries.retain(|e| e.2 != 0.0);
        out
    }

    /// `A • X` against a dense symmetric matrix.
    pub fn dot(&self, x: &SymMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * x.get(i, j)).sum()
    }

    /// Adds `c · self` into the dense symmetric accumulator. `self` must be
    /// symmetric.
    pub fn add_scaled_into(&self, c: f64, acc: &mut SymMatrix) {
        for &(i, j, v) in &self.entries {
            if i <= j {
                acc.add_at(i, j, c * v);
            }
        }
    }

    pub fn kron(&self, other: &SparseMatrix) -> SparseMatrix {
        let mut entries = Vec::with_capacity(self.nnz() * other.nnz());
        // Row-major order of the product follows from iterating the row
        // pairs in order and merging columns within each product row.
        let a_rows = group_rows(&self.entries);
        let b_rows = group_rows(&other.entries);
        for (ia, a_row) in &a_rows {
            for (ib, b_row) in &b_rows {
                let row = ia * other.rows + ib;
                for &(_, ja, va) in *a_row {
                    for &(_, jb, vb) in *b_row {
                        entries.push((row, ja * other.cols + jb, va * vb));
                    }
                }
            }
        }
        // Within a product row, columns are ordered by (ja, jb), which is the
        // natural column order.
        entries.retain(|e| e.2 != 0.0);
        SparseMatrix {
            rows: self.rows * other.rows,
            cols: self.cols * other.cols,
            entries,
        }
    }
}

type Entry = (usize, usize, f64);

fn group_rows(entries: &[Entry]) -> Vec<(usize, &[Entry])> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < entries.len() {
        let row = entries[start].0;
        let mut end = start;
        while end < entries.len() && entries[end].0 == row {
            end += 1;
        }
        out.push((row, &entries[start..end]));
        start = end;
    }
    out
}

/// `A • B = Σ A[i][j]·B[i][j] = Tr(A Bᵀ)`.
pub fn frobenius_dot(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(dim_mismatch(
            "frobenius_dot",
            (a.dim, a.dim),
            (b.dim, b.dim),
        ));
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Entrywise (Hadamard) product `A ∘ B`.
pub fn entrywise_product(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.shape() != b.shape() {
        return Err(dim_mismatch("entrywise_product", a.shape(), b.shape()));
    }
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

/// Kronecker product.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (br, bc) = b.shape();
    Matrix::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a.get(i / br, j / bc) * b.get(i % br, j % bc)
    })
}

/// Kronecker product of symmetric matrices (symmetric again).
pub fn kron_sym(a: &SymMatrix, b: &SymMatrix) -> SymMatrix {
    let bd = b.dim;
    SymMatrix::from_upper(a.dim * bd, |i, j| {
        a.get(i / bd, j / bd) * b.get(i % bd, j % bd)
    })
}

/// Bipartite version `[[0, A], [Aᵀ, 0]]` of an arbitrary matrix.
pub fn hat(a: &Matrix) -> SymMatrix {
    let (m, n) = a.shape();
    let mut out = SymMatrix::zeros(m + n);
    for i in 0..m {
        for j in 0..n {
            out.set(i, m + j, a.get(i, j));
        }
    }
    out
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// (column `k` of `eigenvectors` belongs to `eigenvalues[k]`).
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `V diag(λ) Vᵀ`
    pub fn reconstruct(&self) -> SymMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        SymMatrix::from_upper(n, |i, j| {
            (0..n)
                .map(|k| v.get(i, k) * self.eigenvalues[k] * v.get(j, k))
                .sum()
        })
    }
}

/// Cyclic Jacobi eigendecomposition with a fixed row-by-row sweep order.
pub fn eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    let n = a.dim;
    if let Some(bad) = a.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite entry {bad} in eigen input"
        )));
    }
    let mut m = a.to_matrix();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if n <= 1 || scale == 0.0 {
        return Ok(sorted_decomposition(&m, v));
    }
    for sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n - 1)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| m.get(p, q).abs())
            .sum();
        if off == 0.0 {
            return Ok(sorted_decomposition(&m, v));
        }
        // Early sweeps only rotate the large elements.
        let threshold = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    m.set(p, q, 0.0);
                    m.set(q, p, 0.0);
                    continue;
                }
                if apq.abs() <= threshold || apq == 0.0 {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    Err(Error::EigenNoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
    })
}

// Applies the Jacobi rotation J(p, q, θ) as Jᵀ M J and accumulates V J.
fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows;
    for k in 0..n {
        let mkp = m.get(k, p);
        let mkq = m.get(k, q);
        m.set(k, p, c * mkp - s * mkq);
        m.set(k, q, s * mkp + c * mkq);
    }
    for k in 0..n {
        let mpk = m.get(p, k);
        let mqk = m.get(q, k);
        m.set(p, k, c * mpk - s * mqk);
        m.set(q, k, s * mpk + c * mqk);
    }
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn sorted_decomposition(m: &Matrix, v: Matrix) -> EigenDecomposition {
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m.get(a, a).total_cmp(&m.get(b, b)).then(a.cmp(&b)));
    EigenDecomposition {
        eigenvalues: order.iter().map(|&k| m.get(k, k)).collect(),
        eigenvectors: Matrix::from_fn(n, n, |i, j| v.get(i, order[j])),
    }
}

pub fn min_eigenvalue(a: &SymMatrix) -> Result<f64> {
    Ok(eigen(a)?.min_eigenvalue())
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(a: &SymMatrix, tol: f64) -> Result<bool> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidInput(format!(
            "PSD tolerance must be >= 0, got {tol}"
        )));
    }
    Ok(min_eigenvalue(a)? >= -tol)
}
