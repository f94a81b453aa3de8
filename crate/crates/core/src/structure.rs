//! Checkers for the hypotheses of the product theorems.
//!
//! * MS-1: every relation is an equality, no non-negativity rows, `J ⪰ 0`.
//! * MS-2: every relation is an equality, no non-negativity rows, and a
//!   partition exists making `J` block anti-diagonal and every `A_k` block
//!   diagonal.
//! * Main: the same partition also makes every `B_k` block anti-diagonal,
//!   and `J = uᵀB` for some `u >= 0`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{eigen, SymMatrix, DEFAULT_PSD_TOL};
use crate::model::{product, Relation, SdpProgram, SdpSolution};
use crate::solver::{dual_slack, measure, nnls, solve, SlackSign, SolverConfig, Status};

/// Entries with `|v| <= SUPPORT_TOL` are treated as structural zeros.
pub const SUPPORT_TOL: f64 = 1e-12;
pub const DEFAULT_SPAN_TOL: f64 = 1e-8;
/// Feasibility tolerance for the product dual candidate.
pub const DUAL_CANDIDATE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BipartitePartition {
    pub side: Vec<Side>,
}

impl BipartitePartition {
    pub fn left(&self) -> Vec<usize> {
        self.indices(Side::Left)
    }

    pub fn right(&self) -> Vec<usize> {
        self.indices(Side::Right)
    }

    fn indices(&self, s: Side) -> Vec<usize> {
        (0..self.side.len())
            .filter(|&i| self.side[i] == s)
            .collect()
    }

    fn same(&self, i: usize, j: usize) -> bool {
        self.side[i] == self.side[j]
    }

    /// Direct support scan: every `A_k` inside the diagonal blocks, `J` and
    /// every `B_k` inside the off-diagonal blocks.
    pub fn certifies(&self, p: &SdpProgram) -> bool {
        if self.side.len() != p.dim {
            return false;
        }
        let d = p.dim;
        let j_ok = (0..d).all(|a| {
            (0..d).all(|b| p.objective.get(a, b).abs() <= SUPPORT_TOL || !self.same(a, b))
        });
        let a_ok = p.constraints.iter().all(|c| {
            c.matrix
                .entries()
                .iter()
                .all(|&(a, b, v)| v.abs() <= SUPPORT_TOL || self.same(a, b))
        });
        let b_ok = p.nonneg.iter().all(|m| {
            m.entries()
                .iter()
                .all(|&(a, b, v)| v.abs() <= SUPPORT_TOL || !self.same(a, b))
        });
        j_ok && a_ok && b_ok
    }
}

/// Union-find where each node stores its parity relative to its parent.
struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<u8>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            parity: vec![0; n],
        }
    }

    /// Root and parity of `i` relative to it.
    fn find(&mut self, i: usize) -> (usize, u8) {
        let mut path = Vec::new();
        let mut cur = i;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // Compress from the top of the path down so each parity is relative
        // to the root.
        let mut acc = 0u8;
        for &node in path.iter().rev() {
            acc ^= self.parity[node];
            self.parity[node] = acc;
            self.parent[node] = root;
        }
        (root, self.parity[i])
    }

    /// Records `side(i) xor side(j) == rel`. Returns false on contradiction.
    fn union(&mut self, i: usize, j: usize, rel: u8) -> bool {
        let (ri, pi) = self.find(i);
        let (rj, pj) = self.find(j);
        if ri == rj {
            return pi ^ pj == rel;
        }
        // Smaller index stays root.
        let (root, child) = if ri < rj { (ri, rj) } else { (rj, ri) };
        self.parent[child] = root;
        self.parity[child] = pi ^ pj ^ rel;
        true
    }
}

/// Finds a partition under which `J` and every `B_k` are block anti-diagonal
/// and every `A_k` is block diagonal, or `None` when there is none.
pub fn find_partition(p: &SdpProgram) -> Option<BipartitePartition> {
    let d = p.dim;
    let mut uf = ParityUnionFind::new(d);
    for a in 0..d {
        for b in a..d {
            let supported = p.objective.get(a, b).abs() > SUPPORT_TOL
                || p.objective.get(b, a).abs() > SUPPORT_TOL;
            if supported && (a == b || !uf.union(a, b, 1)) {
                return None;
            }
        }
    }
    for m in &p.nonneg {
        for &(a, b, v) in m.entries() {
            if v.abs() > SUPPORT_TOL && (a == b || !uf.union(a, b, 1)) {
                return None;
            }
        }
    }
    for c in &p.constraints {
        for &(a, b, v) in c.matrix.entries() {
            if v.abs() > SUPPORT_TOL && a != b && !uf.union(a, b, 0) {
                return None;
            }
        }
    }
    let mut side: Vec<Side> = (0..d)
        .map(|i| {
            if uf.find(i).1 == 0 {
                Side::Left
            } else {
                Side::Right
            }
        })
        .collect();
    if d >= 2 && side.iter().all(|s| *s == Side::Left) {
        // No opposite-side constraint anywhere; move the component of the
        // last index across if that leaves something behind.
        let root = uf.find(d - 1).0;
        let members: Vec<usize> = (0..d).filter(|&i| uf.find(i).0 == root).collect();
        if members.len() == d {
            return None;
        }
        for i in members {
            side[i] = side[i].flip();
        }
    }
    let part = BipartitePartition { side };
    debug_assert!(part.certifies(p));
    Some(part)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanWitness {
    /// One coefficient per non-negativity row.
    pub u: Vec<f64>,
    pub residual: f64,
}

impl SpanWitness {
    /// `Σ u_k B_k`.
    pub fn combination(&self, p: &SdpProgram) -> SymMatrix {
        let mut acc = SymMatrix::zeros(p.dim);
        for (b, uk) in p.nonneg.iter().zip(&self.u) {
            b.add_scaled_into(*uk, &mut acc);
        }
        acc
    }
}

/// Non-negative `u` with `J = Σ u_k B_k`, accepted when the NNLS residual is
/// at most `tol·(1 + ‖J‖_F)`.
///
/// Identical `B_k` are merged before the NNLS and their coefficient is then
/// split evenly, so the witness is canonical.
pub fn span_witness(p: &SdpProgram, tol: f64) -> Option<SpanWitness> {
    let d = p.dim;
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (k, b) in p.nonneg.iter().enumerate() {
        match groups.iter_mut().find(|(rep, _)| p.nonneg[*rep] == *b) {
            Some((_, members)) => members.push(k),
            None => groups.push((k, vec![k])),
        }
    }
    // Only positions touched by some B_k can be fitted; the rest of J is
    // pure residual.
    let mut rows: Vec<usize> = p
        .nonneg
        .iter()
        .flat_map(|b| b.entries().iter().map(move |&(i, j, _)| i * d + j))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let j_norm2: f64 = p.objective.as_slice().iter().map(|v| v * v).sum();
    let target: Vec<f64> = rows
        .iter()
        .map(|&r| p.objective.get(r / d, r % d))
        .collect();
    let outside2: f64 = (0..d * d)
        .filter(|r| rows.binary_search(r).is_err())
        .map(|r| p.objective.get(r / d, r % d).powi(2))
        .sum();
    let columns: Vec<Vec<f64>> = groups
        .iter()
        .map(|(rep, _)| {
            let b = &p.nonneg[*rep];
            rows.iter().map(|&r| b.get(r / d, r % d)).collect()
        })
        .collect();
    let fit = nnls(&columns, &target).ok()?;
    let residual = (fit.residual * fit.residual + outside2).sqrt();
    if residual > tol * (1.0 + j_norm2.sqrt()) {
        return None;
    }
    let mut u = vec![0.0; p.nonneg.len()];
    for ((_, members), c) in groups.iter().zip(&fit.coeffs) {
        let share = c / members.len() as f64;
        for &k in members {
            u[k] = share;
        }
    }
    Some(SpanWitness { u, residual })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremRule {
    Ms1,
    Ms2,
    Main,
    None,
}

impl fmt::Display for TheoremRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremRule::Ms1 => "MS-1",
            TheoremRule::Ms2 => "MS-2",
            TheoremRule::Main => "Main",
            TheoremRule::None => "None",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub cond1_psd_objective: bool,
    pub bipartite: Option<BipartitePartition>,
    pub span_witness: Option<SpanWitness>,
    pub theorem_applies: TheoremRule,
}

pub fn check_conditions(p: &SdpProgram) -> Result<ConditionReport> {
    p.ensure_valid()?;
    let psd = eigen(&p.objective_sym())?.min_eigenvalue() >= -DEFAULT_PSD_TOL;
    let bipartite = find_partition(p);
    let witness = span_witness(p, DEFAULT_SPAN_TOL);
    let affine = p.nonneg.is_empty() && p.all_equalities();
    let theorem_applies = if affine && psd {
        TheoremRule::Ms1
    } else if affine && bipartite.is_some() {
        TheoremRule::Ms2
    } else if bipartite.is_some() && witness.is_some() {
        TheoremRule::Main
    } else {
        TheoremRule::None
    };
    Ok(ConditionReport {
        cond1_psd_objective: psd,
        bipartite,
        span_witness: witness,
        theorem_applies,
    })
}

/// Smallest eigenvalues of the minus and plus dual slacks at `(y, z)`.
pub fn slack_spectra(p: &SdpProgram, y: &[f64], z: &[f64]) -> Result<(f64, f64)> {
    let minus = eigen(&dual_slack(p, y, z, SlackSign::Minus)?)?.min_eigenvalue();
    let plus = eigen(&dual_slack(p, y, z, SlackSign::Plus)?)?.min_eigenvalue();
    Ok((minus, plus))
}

/// The dual point `(y₁⊗y₂, z₁⊗z₂ + z₁⊗u₂ + u₁⊗z₂)` for `π₁ × π₂`.
pub fn product_dual_candidate(
    s1: &SdpSolution,
    u1: &[f64],
    s2: &SdpSolution,
    u2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if s1.z.len() != u1.len() || s2.z.len() != u2.len() {
        return Err(Error::DimensionMismatch(format!(
            "span witnesses of length ({}, {}) for dual vectors of length ({}, {})",
            u1.len(),
            u2.len(),
            s1.z.len(),
            s2.z.len()
        )));
    }
    let y: Vec<f64> =
        s1.y.iter()
            .flat_map(|a| s2.y.iter().map(move |b| a * b))
            .collect();
    let mut v = Vec::with_capacity(u1.len() * u2.len());
    for (z1, w1) in s1.z.iter().zip(u1) {
        for (z2, w2) in s2.z.iter().zip(u2) {
            v.push(z1 * z2 + z1 * w2 + w1 * z2);
        }
    }
    Ok((y, v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualCandidateCheck {
    /// Smallest eigenvalue of `yᵀA - (vᵀB + J)` on the product.
    pub min_slack_eigenvalue: f64,
    /// Most negative entry of `v` and of `y` on inequality rows (0 if none).
    pub sign_violation: f64,
    /// `yᵀb` of the candidate.
    pub value: f64,
    pub feasible: bool,
}

pub fn check_dual_candidate(
    prod: &SdpProgram,
    y: &[f64],
    v: &[f64],
    tol: f64,
) -> Result<DualCandidateCheck> {
    let min_slack_eigenvalue = eigen(&dual_slack(prod, y, v, SlackSign::Minus)?)?.min_eigenvalue();
    let sign_violation = v
        .iter()
        .copied()
        .chain(
            prod.constraints
                .iter()
                .zip(y)
                .filter(|(c, _)| c.relation == Relation::Le)
                .map(|(_, yk)| *yk),
        )
        .fold(0.0f64, |m, x| m.max(-x));
    let value = prod
        .constraints
        .iter()
        .zip(y)
        .map(|(c, yk)| c.rhs * yk)
        .sum();
    Ok(DualCandidateCheck {
        min_slack_eigenvalue,
        sign_violation,
        value,
        feasible: min_slack_eigenvalue >= -tol && sign_violation <= tol,
    })
}

#[derive(Clone, Debug)]
pub struct ProductVerdict {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_product: f64,
    pub statuses: [Status; 3],
    /// `|α(π₁×π₂) - α(π₁)·α(π₂)|`
    pub gap: f64,
    pub tolerance: f64,
    /// All three solves optimal and `gap <= tolerance`.
    pub perfect: bool,
    /// Present when both factors carry a span witness.
    pub dual_candidate: Option<DualCandidateCheck>,
    pub solutions: [SdpSolution; 3],
}

/// Relative tolerance on the multiplicative gap, applied as
/// `PRODUCT_TOL·(1 + |α₁α₂|)`.
pub const PRODUCT_TOL: f64 = 5e-5;

pub fn verify_perfect_product(
    p1: &SdpProgram,
    p2: &SdpProgram,
    cfg: &SolverConfig,
) -> Result<ProductVerdict> {
    let prod = product(p1, p2)?;
    let r1 = solve(p1, cfg)?;
    let r2 = solve(p2, cfg)?;
    let r12 = solve(&prod, cfg)?;
    let (a1, a2, a12) = (r1.primal_value(), r2.primal_value(), r12.primal_value());
    let gap = (a12 - a1 * a2).abs();
    let tolerance = PRODUCT_TOL * (1.0 + (a1 * a2).abs());
    let statuses = [r1.status, r2.status, r12.status];
    let perfect = statuses.iter().all(|s| *s == Status::Optimal) && gap <= tolerance;
    let dual_candidate = match (
        find_partition(p1).and(span_witness(p1, DEFAULT_SPAN_TOL)),
        find_partition(p2).and(span_witness(p2, DEFAULT_SPAN_TOL)),
    ) {
        (Some(w1), Some(w2)) => {
            let (y, v) = product_dual_candidate(&r1.solution, &w1.u, &r2.solution, &w2.u)?;
            Some(check_dual_candidate(&prod, &y, &v, DUAL_CANDIDATE_TOL)?)
        }
        _ => None,
    };
    Ok(ProductVerdict {
        alpha1: a1,
        alpha2: a2,
        alpha_product: a12,
        statuses,
        gap,
        tolerance,
        perfect,
        dual_candidate,
        solutions: [r1.solution, r2.solution, r12.solution],
    })
}

/// Checks `X₁⊗X₂` against the product program directly; returns the largest
/// constraint violation and the smallest eigenvalue.
pub fn tensor_feasibility(prod: &SdpProgram, x1: &SymMatrix, x2: &SymMatrix) -> Result<(f64, f64)> {
    let x = crate::linalg::kron_sym(x1, x2);
    if x.dim() != prod.dim {
        return Err(crate::error::dim_mismatch(
            "tensor iterate",
            (x.dim(), x.dim()),
            (prod.dim, prod.dim),
        ));
    }
    let (sol, _) = measure(
        prod,
        &x,
        &vec![0.0; prod.constraints.len()],
        &vec![0.0; prod.nonneg.len()],
    )?;
    Ok((sol.residuals.max_primal(), -sol.residuals.primal_psd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hat, Matrix, SparseMatrix};

    fn counterexample() -> SdpProgram {
        let mut j = SymMatrix::zeros(2);
        j.set(0, 1, -1.0);
        let mut p = SdpProgram::new(j);
        p.add_eq(SparseMatrix::identity(2), 1.0);
        p.add_nonneg(SparseMatrix::entry_mask(2, 0, 1));
        p.add_nonneg(SparseMatrix::entry_mask(2, 1, 0));
        p
    }

    #[test]
    fn parity_union_find_detects_odd_cycle() {
        let mut uf = ParityUnionFind::new(3);
        assert!(uf.union(0, 1, 1));
        assert!(uf.union(1, 2, 1));
        assert!(!uf.union(0, 2, 1));
        assert!(uf.union(0, 2, 0));
    }

    #[test]
    fn counterexample_is_bipartite_without_span() {
        let p = counterexample();
        let part = find_partition(&p).unwrap();
        assert_eq!(part.side, vec![Side::Left, Side::Right]);
        assert!(part.certifies(&p));
        assert!(span_witness(&p, DEFAULT_SPAN_TOL).is_none());
        assert_eq!(
            check_conditions(&p).unwrap().theorem_applies,
            TheoremRule::None
        );
    }

    #[test]
    fn nonzero_diagonal_objective_has_no_partition() {
        let mut j = SymMatrix::zeros(2);
        j.set(0, 0, 1.0);
        assert!(find_partition(&SdpProgram::new(j)).is_none());
    }

    #[test]
    fn unconstrained_indices_still_split() {
        let p = SdpProgram::new(SymMatrix::zeros(3));
        let part = find_partition(&p).unwrap();
        assert_eq!(part.side, vec![Side::Left, Side::Left, Side::Right]);
    }

    #[test]
    fn fully_same_side_program_has_no_partition() {
        let mut p = SdpProgram::new(SymMatrix::zeros(2));
        p.add_eq(SparseMatrix::entry_mask(2, 0, 1), 0.0);
        assert!(find_partition(&p).is_none());
    }

    #[test]
    fn duplicate_columns_share_their_weight() {
        let h = hat(&Matrix::from_rows(&[vec![1.0]]).unwrap());
        let mut p = SdpProgram::new(h);
        p.add_nonneg(SparseMatrix::entry_mask(2, 0, 1));
        p.add_nonneg(SparseMatrix::entry_mask(2, 1, 0));
        let w = span_witness(&p, DEFAULT_SPAN_TOL).unwrap();
        assert_eq!(w.u, vec![1.0, 1.0]);
        assert_eq!(w.residual, 0.0);
    }

    #[test]
    fn product_dual_candidate_shapes() {
        let p = counterexample();
        let sol = solve(&p, &SolverConfig::default()).unwrap().solution;
        let (y, v) = product_dual_candidate(&sol, &[0.0, 0.0], &sol, &[0.0, 0.0]).unwrap();
        assert_eq!(y.len(), 1);
        assert_eq!(v.len(), 4);
        assert!(product_dual_candidate(&sol, &[0.0], &sol, &[0.0, 0.0]).is_err());
    }
}
