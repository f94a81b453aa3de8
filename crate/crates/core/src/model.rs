//! Structured programs `max J • X  s.t.  A • X (= | <=) b,  B • X >= 0,  X ⪰ 0`
//! and their tensor products.

use crate::error::{Error, Result};
use crate::linalg::{hat, kron, Matrix, SparseMatrix, SymMatrix};

/// Relation of a linear constraint row `A_k • X ? b_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Eq,
    Le,
}

impl Relation {
    /// Relation of a product row: equality only when both factors are
    /// equalities.
    pub fn combine(self, other: Relation) -> Relation {
        match (self, other) {
            (Relation::Eq, Relation::Eq) => Relation::Eq,
            _ => Relation::Le,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub matrix: SparseMatrix,
    pub rhs: f64,
    pub relation: Relation,
}

/// A program `(J, A, b, B)`. Constraint matrices are kept sparse; the
/// objective is dense.
///
/// Fields are public so that malformed programs can be represented and
/// reported by [`SdpProgram::validate`]; every other operation expects a
/// program that validates cleanly.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProgram {
    pub dim: usize,
    pub objective: Matrix,
    pub constraints: Vec<Constraint>,
    pub nonneg: Vec<SparseMatrix>,
}

impl SdpProgram {
    pub fn new(objective: SymMatrix) -> Self {
        Self {
            dim: objective.dim(),
            objective: objective.to_matrix(),
            constraints: Vec::new(),
            nonneg: Vec::new(),
        }
    }

    pub fn add_eq(&mut self, matrix: SparseMatrix, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            matrix,
            rhs,
            relation: Relation::Eq,
        });
        self
    }

    pub fn add_le(&mut self, matrix: SparseMatrix, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            matrix,
            rhs,
            relation: Relation::Le,
        });
        self
    }

    /// `A • X >= b` is stored as `(-A) • X <= -b`.
    pub fn add_ge(&mut self, matrix: SparseMatrix, rhs: f64) -> &mut Self {
        self.add_le(matrix.scale(-1.0), -rhs)
    }

    pub fn add_nonneg(&mut self, matrix: SparseMatrix) -> &mut Self {
        self.nonneg.push(matrix);
        self
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_eq(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.relation == Relation::Eq)
            .count()
    }

    pub fn num_le(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.relation == Relation::Le)
            .count()
    }

    pub fn all_equalities(&self) -> bool {
        self.constraints.iter().all(|c| c.relation == Relation::Eq)
    }

    /// The objective as a symmetric matrix. Panics on an asymmetric objective,
    /// which [`validate`](Self::validate) reports.
    pub fn objective_sym(&self) -> SymMatrix {
        SymMatrix::try_from_matrix(&self.objective)
            .expect("objective of a validated program is symmetric")
    }

    /// Human-readable defects; empty iff the program is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut defects = Vec::new();
        let d = self.dim;
        if d == 0 {
            defects.push("program dimension is zero".to_string());
        }
        let (r, c) = self.objective.shape();
        if (r, c) != (d, d) {
            defects.push(format!(
                "objective is {r}x{c}, expected {d}x{d} (dimension mismatch)"
            ));
        } else if !self.objective.is_symmetric() {
            defects.push("objective is not symmetric".to_string());
        }
        if !self.objective.all_finite() {
            defects.push("objective has non-finite entries".to_string());
        }
        for (k, con) in self.constraints.iter().enumerate() {
            let kind = match con.relation {
                Relation::Eq => "equality",
                Relation::Le => "inequality",
            };
            check_matrix(
                &mut defects,
                &format!("{kind} constraint {k}"),
                &con.matrix,
                d,
            );
            if !con.rhs.is_finite() {
                defects.push(format!(
                    "{kind} constraint {k} has non-finite right-hand side"
                ));
            }
        }
        for (k, b) in self.nonneg.iter().enumerate() {
            check_matrix(
                &mut defects,
                &format!("non-negativity constraint {k}"),
                b,
                d,
            );
        }
        defects
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let defects = self.validate();
        if defects.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProgram(defects))
        }
    }

    /// Stable reordering putting equalities before inequalities.
    pub fn canonicalize(&mut self) {
        self.constraints.sort_by_key(|c| c.relation);
    }

    pub fn is_canonical(&self) -> bool {
        self.constraints
            .windows(2)
            .all(|w| w[0].relation <= w[1].relation)
    }

    /// Returns `(A•X - b)` for every constraint row and `B•X` for every
    /// non-negativity row.
    pub fn evaluate(&self, x: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.matrix.dot(x) - c.rhs)
            .collect();
        let nonneg = self.nonneg.iter().map(|b| b.dot(x)).collect();
        (rows, nonneg)
    }

    /// Largest violation of any constraint by `x` (PSD-ness excluded).
    pub fn max_violation(&self, x: &SymMatrix) -> f64 {
        let (rows, nonneg) = self.evaluate(x);
        let mut worst: f64 = 0.0;
        for (r, c) in rows.iter().zip(&self.constraints) {
            let v = match c.relation {
                Relation::Eq => r.abs(),
                Relation::Le => r.max(0.0),
            };
            worst = worst.max(v);
        }
        for v in nonneg {
            worst = worst.max(-v);
        }
        worst
    }

    pub fn objective_value(&self, x: &SymMatrix) -> f64 {
        let j = &self.objective;
        (0..self.dim)
            .flat_map(|a| (0..self.dim).map(move |b| (a, b)))
            .map(|(a, b)| j.get(a, b) * x.get(a, b))
            .sum()
    }
}

fn check_matrix(defects: &mut Vec<String>, what: &str, m: &SparseMatrix, d: usize) {
    let (r, c) = m.shape();
    if (r, c) != (d, d) {
        defects.push(format!(
            "{what} is {r}x{c}, expected {d}x{d} (dimension mismatch)"
        ));
    } else if !m.is_symmetric() {
        defects.push(format!("{what} is not symmetric"));
    }
    if m.entries().iter().any(|e| !e.2.is_finite()) {
        defects.push(format!("{what} has non-finite entries"));
    }
}

/// Tensor product `π₁ × π₂ = (J₁⊗J₂, A₁⊗A₂, b₁⊗b₂, B₁⊗B₂)`.
///
/// Constraint rows are all pairs `(i, j)` in lexicographic order; equality
/// and non-negativity rows never mix.
pub fn product(p1: &SdpProgram, p2: &SdpProgram) -> Result<SdpProgram> {
    p1.ensure_valid()?;
    p2.ensure_valid()?;
    let mut constraints = Vec::with_capacity(p1.constraints.len() * p2.constraints.len());
    for c1 in &p1.constraints {
        for c2 in &p2.constraints {
            constraints.push(Constraint {
                matrix: c1.matrix.kron(&c2.matrix),
                rhs: c1.rhs * c2.rhs,
                relation: c1.relation.combine(c2.relation),
            });
        }
    }
    let mut nonneg = Vec::with_capacity(p1.nonneg.len() * p2.nonneg.len());
    for b1 in &p1.nonneg {
        for b2 in &p2.nonneg {
            nonneg.push(b1.kron(b2));
        }
    }
    Ok(SdpProgram {
        dim: p1.dim * p2.dim,
        objective: kron(&p1.objective, &p2.objective),
        constraints,
        nonneg,
    })
}

/// `hat(A ⊗ A)`.
pub fn bipartite_tensor(a: &Matrix) -> SymMatrix {
    hat(&kron(a, a))
}

/// Primal and dual iterates of a solved program.
///
/// `y` is aligned with `constraints` (equalities and inequalities in program
/// order) and `z` with `nonneg`.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: SymMatrix,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub residuals: Residuals,
}

/// Violation magnitudes measured directly on a returned solution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Residuals {
    /// `|A_k•X - b_k|` for equalities, `max(A_k•X - b_k, 0)` for inequalities.
    pub constraints: Vec<f64>,
    /// `max(-B_k•X, 0)`.
    pub nonneg: Vec<f64>,
    /// `max(-λ_min(X), 0)`.
    pub primal_psd: f64,
    /// `max(-λ_min(yᵀA - (zᵀB + J)), 0)`.
    pub dual_psd: f64,
    /// `max(-z_k, 0)` and `max(-y_k, 0)` over inequality rows.
    pub dual_sign: f64,
}

impl Residuals {
    pub fn max_primal(&self) -> f64 {
        self.constraints
            .iter()
            .chain(&self.nonneg)
            .fold(self.primal_psd, |m, v| m.max(*v))
    }

    pub fn max_dual(&self) -> f64 {
        self.dual_psd.max(self.dual_sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron_sym;

    fn trivial() -> SdpProgram {
        let mut p = SdpProgram::new(SymMatrix::identity(1));
        p.add_eq(SparseMatrix::identity(1), 1.0);
        p
    }

    fn two_dim() -> SdpProgram {
        let mut p = SdpProgram::new(SymMatrix::from_upper(
            2,
            |i, j| if i == j { 0.0 } else { 1.0 },
        ));
        p.add_eq(SparseMatrix::identity(2), 1.0);
        p.add_nonneg(SparseMatrix::entry_mask(2, 0, 1));
        p
    }

    #[test]
    fn validate_reports_defects() {
        assert!(two_dim().validate().is_empty());

        let mut p = SdpProgram::new(SymMatrix::identity(3));
        p.add_eq(SparseMatrix::identity(2), 1.0);
        let defects = p.validate();
        assert_eq!(defects.len(), 1);
        assert!(defects[0].contains("dimension mismatch"));

        let mut p = two_dim();
        p.objective = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let defects = p.validate();
        assert_eq!(defects, vec!["objective is not symmetric".to_string()]);

        let mut p = two_dim();
        p.add_nonneg(SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap());
        assert!(p.validate()[0].contains("not symmetric"));
        assert!(product(&p, &trivial()).is_err());
    }

    #[test]
    fn product_of_trivial_programs() {
        let p = product(&trivial(), &trivial()).unwrap();
        assert_eq!(p.dim, 1);
        assert_eq!(p.constraints.len(), 1);
        assert_eq!(p.constraints[0].rhs, 1.0);
        assert_eq!(p.constraints[0].matrix, SparseMatrix::identity(1));
        assert_eq!(p.objective, Matrix::identity(1));
    }

    #[test]
    fn product_counts_and_relations() {
        let mut a = two_dim();
        a.add_le(SparseMatrix::entry_mask(2, 0, 0), 3.0);
        let b = two_dim();
        let p = product(&a, &b).unwrap();
        assert_eq!(p.dim, 4);
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.nonneg.len(), 1);
        assert_eq!(p.constraints[0].relation, Relation::Eq);
        assert_eq!(p.constraints[1].relation, Relation::Le);
        assert_eq!(p.constraints[1].rhs, 3.0);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn relation_combination_table() {
        use Relation::*;
        assert_eq!(Eq.combine(Eq), Eq);
        assert_eq!(Eq.combine(Le), Le);
        assert_eq!(Le.combine(Eq), Le);
        assert_eq!(Le.combine(Le), Le);
    }

    #[test]
    fn ge_is_stored_negated() {
        let mut p = SdpProgram::new(SymMatrix::identity(1));
        p.add_ge(SparseMatrix::identity(1), 2.0);
        assert_eq!(p.constraints[0].relation, Relation::Le);
        assert_eq!(p.constraints[0].rhs, -2.0);
        assert_eq!(p.constraints[0].matrix.get(0, 0), -1.0);
    }

    #[test]
    fn tensor_of_feasible_points_is_feasible() {
        let x = SymMatrix::from_upper(2, |_, _| 0.5);
        let p = product(&two_dim(), &two_dim()).unwrap();
        assert_eq!(two_dim().max_violation(&x), 0.0);
        assert!(p.max_violation(&kron_sym(&x, &x)) <= 1e-15);
        assert_eq!(p.objective_value(&kron_sym(&x, &x)), 1.0);
    }

    #[test]
    fn bipartite_tensor_shapes() {
        let one = Matrix::identity(1);
        assert_eq!(
            bipartite_tensor(&one).to_matrix(),
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
        );
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = bipartite_tensor(&a);
        assert_eq!(b.dim(), 8);
        for i in 0..8 {
            for j in 0..8 {
                if (i < 4) == (j < 4) {
                    assert_eq!(b.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn canonical_ordering() {
        let mut p = trivial();
        p.add_le(SparseMatrix::identity(1), 2.0);
        p.add_eq(SparseMatrix::identity(1), 1.0);
        assert!(!p.is_canonical());
        p.canonicalize();
        assert!(p.is_canonical());
        assert_eq!(p.constraints[2].rhs, 2.0);
    }
}
