use crate::error::{Error, Result};
use crate::linalg::{hat, Matrix, SparseMatrix, SymMatrix};
use crate::model::SdpProgram;

/// A matrix with every entry exactly `+1` or `-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignMatrix(Matrix);

impl SignMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(v) = m.as_slice().iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(Error::InvalidInput(format!(
                "sign matrix entry {v} is not ±1"
            )));
        }
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::InvalidInput("sign matrix must be non-empty".into()));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// The 2×2 Hadamard pattern `[[1, 1], [1, -1]]`.
    pub fn hadamard2() -> Self {
        Self::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]).expect("±1 entries")
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }
}

/// The γ₂^∞ program of `M`, over `X` indexed by rows then columns of `M`:
///
/// `max M̂•X  s.t.  I•X = 1,  X[i][j] = 0 for same-block i < j,
///  X • sym(M̂ ∘ E_ij) >= 0 for every ordered cross-block (i, j)`.
///
/// The non-negativity rows are ordered by `(i, j)` over all `2mn` ordered
/// cross-block pairs, so `M̂` is their sum.
pub fn gamma2inf_program(m: &SignMatrix) -> SdpProgram {
    let (r, c) = (m.rows(), m.cols());
    let d = r + c;
    let h = hat(m.matrix());
    let block = |i: usize| i < r;
    let mut p = SdpProgram::new(h.clone());
    p.add_eq(SparseMatrix::identity(d), 1.0);
    for i in 0..d {
        for j in i + 1..d {
            if block(i) == block(j) {
                p.add_eq(SparseMatrix::entry_mask(d, i, j), 0.0);
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            if block(i) != block(j) {
                p.add_nonneg(SparseMatrix::entry_mask(d, i, j).scale(h.get(i, j)));
            }
        }
    }
    p
}

/// `max [[0,-1],[-1,0]]•X  s.t.  I•X = 1,  X[0][1] >= 0,  X[1][0] >= 0,  X ⪰ 0`.
///
/// Bipartite, value 0, and its square has value 1.
pub fn counterexample_program() -> SdpProgram {
    let mut j = SymMatrix::zeros(2);
    j.set(0, 1, -1.0);
    let mut p = SdpProgram::new(j);
    p.add_eq(SparseMatrix::identity(2), 1.0);
    p.add_nonneg(SparseMatrix::entry_mask(2, 0, 1));
    p.add_nonneg(SparseMatrix::entry_mask(2, 1, 0));
    p
}
