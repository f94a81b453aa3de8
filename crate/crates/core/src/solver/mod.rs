//! Dense SDP solver for [`SdpProgram`]s plus the NNLS routine used by the
//! span-witness check.

mod facial;
mod ipm;
mod nnls;

pub use nnls::{nnls, NnlsResult};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{eigen, SymMatrix};
use crate::model::{Relation, Residuals, SdpProgram, SdpSolution};

use ipm::{svec, svec_index, svec_len, ConicProblem, Outcome, Row};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative duality gap: `|primal - dual| <= gap_tol·(1 + |primal|)`.
    pub gap_tol: f64,
    /// Absolute per-constraint and PSD feasibility tolerance.
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            feas_tol: 1e-7,
            max_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "solver tolerances must be positive (gap_tol {}, feas_tol {})",
                self.gap_tol, self.feas_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIters,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::MaxIters => "max-iters",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: SdpSolution,
    pub status: Status,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn primal_value(&self) -> f64 {
        self.solution.primal_value
    }
}

/// Which side of the dual slack to form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlackSign {
    /// `yᵀA - (zᵀB + J)`
    Minus,
    /// `yᵀA + (zᵀB + J)`
    Plus,
}

pub fn dual_slack(p: &SdpProgram, y: &[f64], z: &[f64], sign: SlackSign) -> Result<SymMatrix> {
    if y.len() != p.constraints.len() || z.len() != p.nonneg.len() {
        return Err(Error::DimensionMismatch(format!(
            "dual vectors of length ({}, {}) for a program with {} constraint rows and {} non-negativity rows",
            y.len(),
            z.len(),
            p.constraints.len(),
            p.nonneg.len()
        )));
    }
    let mut ya = SymMatrix::zeros(p.dim);
    for (c, yk) in p.constraints.iter().zip(y) {
        c.matrix.add_scaled_into(*yk, &mut ya);
    }
    let mut zbj = SymMatrix::symmetrize(&p.objective)?;
    for (b, zk) in p.nonneg.iter().zip(z) {
        b.add_scaled_into(*zk, &mut zbj);
    }
    match sign {
        SlackSign::Minus => ya.sub(&zbj),
        SlackSign::Plus => ya.add(&zbj),
    }
}

fn to_row(m: &crate::linalg::SparseMatrix, sign: f64) -> Row {
    let mut row = Row::default();
    for &(i, j, v) in m.entries() {
        if i > j {
            continue;
        }
        let coef = if i == j {
            v
        } else {
            std::f64::consts::SQRT_2 * v
        };
        row.idx.push(svec_index(i, j));
        row.val.push(sign * coef);
    }
    row
}

/// `X = t·I` satisfying a trace-style row `c·I • X = b`, when one exists.
fn interior_start(p: &SdpProgram) -> f64 {
    let d = p.dim;
    for con in p.constraints.iter().filter(|c| c.relation == Relation::Eq) {
        let e = con.matrix.entries();
        if e.len() == d && e.iter().all(|&(i, j, _)| i == j) {
            let c = e[0].2;
            if e.iter().all(|x| x.2 == c) && con.rhs / c > 0.0 {
                return con.rhs / (c * d as f64);
            }
        }
    }
    1.0
}

fn conic_form(p: &SdpProgram) -> ConicProblem {
    let d = p.dim;
    let j = p.objective_sym();
    let jm = Mat::from_fn(d, d, |a, b| j.get(a, b));
    let mut eq = Vec::new();
    let mut b = Vec::new();
    let mut ineq = Vec::new();
    let mut h = Vec::new();
    for con in &p.constraints {
        match con.relation {
            Relation::Eq => {
                eq.push(to_row(&con.matrix, 1.0));
                b.push(con.rhs);
            }
            Relation::Le => {
                ineq.push(to_row(&con.matrix, 1.0));
                h.push(con.rhs);
            }
        }
    }
    for bm in &p.nonneg {
        ineq.push(to_row(bm, -1.0));
        h.push(0.0);
    }
    debug_assert_eq!(svec(&jm).len(), svec_len(d));
    ConicProblem {
        dim: d,
        c: svec(&jm),
        eq,
        b,
        ineq,
        h,
        x0: interior_start(p),
    }
}

fn to_sym(m: &Mat<f64>) -> SymMatrix {
    SymMatrix::from_upper(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

/// Maps the split dual vectors back onto program order.
fn split_duals(p: &SdpProgram, y_eq: &[f64], lam: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut y = Vec::with_capacity(p.constraints.len());
    let (mut e, mut l) = (0, 0);
    for con in &p.constraints {
        match con.relation {
            Relation::Eq => {
                y.push(y_eq[e]);
                e += 1;
            }
            Relation::Le => {
                y.push(lam[l]);
                l += 1;
            }
        }
    }
    (y, lam[l..].to_vec())
}

/// Measures every solver postcondition directly on `(x, y, z)`.
/// Returns the solution record and the absolute duality gap.
pub fn measure(p: &SdpProgram, x: &SymMatrix, y: &[f64], z: &[f64]) -> Result<(SdpSolution, f64)> {
    let (rows, nonneg_vals) = p.evaluate(x);
    let constraints: Vec<f64> = rows
        .iter()
        .zip(&p.constraints)
        .map(|(r, c)| match c.relation {
            Relation::Eq => r.abs(),
            Relation::Le => r.max(0.0),
        })
        .collect();
    let nonneg: Vec<f64> = nonneg_vals.iter().map(|v| (-v).max(0.0)).collect();
    let primal_psd = (-eigen(x)?.min_eigenvalue()).max(0.0);
    let slack = dual_slack(p, y, z, SlackSign::Minus)?;
    let dual_psd = (-eigen(&slack)?.min_eigenvalue()).max(0.0);
    let dual_sign = z
        .iter()
        .copied()
        .chain(
            p.constraints
                .iter()
                .zip(y)
                .filter(|(c, _)| c.relation == Relation::Le)
                .map(|(_, v)| *v),
        )
        .fold(0.0f64, |m, v| m.max(-v));
    let primal_value = p.objective_value(x);
    let dual_value: f64 = p.constraints.iter().zip(y).map(|(c, v)| c.rhs * v).sum();
    let residuals = Residuals {
        constraints,
        nonneg,
        primal_psd,
        dual_psd,
        dual_sign,
    };
    let gap = (primal_value - dual_value).abs();
    let sol = SdpSolution {
        x: x.clone(),
        y: y.to_vec(),
        z: z.to_vec(),
        primal_value,
        dual_value,
        residuals,
    };
    Ok((sol, gap))
}

fn meets_postconditions(sol: &SdpSolution, gap: f64, cfg: &SolverConfig) -> bool {
    sol.residuals.max_primal() <= cfg.feas_tol
        && sol.residuals.dual_psd <= cfg.feas_tol
        && sol.z.iter().all(|v| *v >= 0.0)
        && sol.residuals.dual_sign <= cfg.feas_tol
        && gap <= cfg.gap_tol * (1.0 + sol.primal_value.abs())
}

/// Solves `max J•X` over the program's feasible set.
///
/// The returned solution is always the last iterate; `status` is `Optimal`
/// only when every feasibility and gap condition was re-measured on that
/// iterate and holds.
///
/// When the interior point method stalls, the program is restated on the
/// smallest face of the PSD cone that a certificate exposes, solved there,
/// and the lifted result is reported if it meets every postcondition.
pub fn solve(p: &SdpProgram, cfg: &SolverConfig) -> Result<SolveReport> {
    p.ensure_valid()?;
    cfg.validate()?;
    solve_at_depth(p, cfg, 0)
}

/// Nested reductions allowed below the original program.
const MAX_REDUCTION_DEPTH: usize = 3;

fn solve_at_depth(p: &SdpProgram, cfg: &SolverConfig, depth: usize) -> Result<SolveReport> {
    let direct = solve_direct(p, cfg)?;
    // A diverging dual also signals a missing interior, so it gets the same
    // retry; genuinely infeasible programs yield no face and keep the verdict.
    let retry = matches!(direct.status, Status::MaxIters | Status::Infeasible);
    if !retry || depth >= MAX_REDUCTION_DEPTH {
        return Ok(direct);
    }
    Ok(match facial::solve_reduced(p, cfg, depth) {
        Some(mut reduced) => {
            reduced.iterations += direct.iterations;
            reduced
        }
        None => direct,
    })
}

fn solve_direct(p: &SdpProgram, cfg: &SolverConfig) -> Result<SolveReport> {
    let conic = conic_form(p);
    let mut last_check: Option<(SdpSolution, f64)> = None;
    let iterate = ipm::run(&conic, cfg, |x, _s, y_eq, lam| {
        let (y, z) = split_duals(p, y_eq, lam);
        match measure(p, &to_sym(x), &y, &z) {
            Ok((sol, gap)) => {
                let ok = meets_postconditions(&sol, gap, cfg);
                last_check = Some((sol, gap));
                ok
            }
            Err(_) => false,
        }
    });
    let (y, z) = split_duals(p, &iterate.y, &iterate.lam);
    let x = to_sym(&iterate.x);
    let (solution, gap) = match last_check {
        Some((sol, gap)) if iterate.outcome == Outcome::Converged => (sol, gap),
        _ => measure(p, &x, &y, &z)?,
    };
    let status = match iterate.outcome {
        Outcome::Converged => Status::Optimal,
        Outcome::Infeasible => Status::Infeasible,
        Outcome::Unbounded => Status::Unbounded,
        Outcome::MaxIters | Outcome::Stalled => {
            if meets_postconditions(&solution, gap, cfg) {
                Status::Optimal
            } else {
                Status::MaxIters
            }
        }
    };
    Ok(SolveReport {
        solution,
        status,
        iterations: iterate.iterations,
    })
}
