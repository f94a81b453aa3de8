use sdp_product::library::{counterexample_program, gamma2inf_program, SignMatrix};
use sdp_product::linalg::{min_eigenvalue, SparseMatrix, SymMatrix};
use sdp_product::solver::{dual_slack, nnls, SlackSign};
use sdp_product::{product, solve, SdpProgram, SolverConfig, Status};

fn tight() -> SolverConfig {
    SolverConfig {
        gap_tol: 1e-9,
        feas_tol: 1e-9,
        ..SolverConfig::default()
    }
}

fn one_dim(j: f64) -> SdpProgram {
    let mut p = SdpProgram::new(SymMatrix::diagonal(&[j]));
    p.add_eq(SparseMatrix::identity(1), 1.0);
    p
}

#[test]
fn trivial_program_has_value_one() {
    let r = solve(&one_dim(1.0), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!((r.primal_value() - 1.0).abs() <= 1e-6);
    assert!((r.solution.dual_value - 1.0).abs() <= 1e-6);
}

#[test]
fn counterexample_value_is_zero() {
    let r = solve(&counterexample_program(), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!(r.primal_value().abs() <= 1e-6);
}

#[test]
fn counterexample_square_is_positive() {
    let ce = counterexample_program();
    let r = solve(&product(&ce, &ce).unwrap(), &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    // X = all-ones/4 is feasible with value 1, and 1 is the top eigenvalue of J⊗J.
    assert!(
        (r.primal_value() - 1.0).abs() <= 1e-5,
        "{}",
        r.primal_value()
    );
}

#[test]
fn inequality_rows_get_nonnegative_duals() {
    // max x s.t. x <= 2.
    let mut p = SdpProgram::new(SymMatrix::identity(1));
    p.add_le(SparseMatrix::identity(1), 2.0);
    let r = solve(&p, &tight()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!((r.primal_value() - 2.0).abs() <= 1e-7);
    assert!(r.solution.y[0] >= 0.0);
    assert!((r.solution.y[0] - 1.0).abs() <= 1e-6);
}

#[test]
fn ge_rows_bound_from_below() {
    // max -x s.t. x >= 3.
    let mut p = SdpProgram::new(SymMatrix::diagonal(&[-1.0]));
    p.add_ge(SparseMatrix::identity(1), 3.0);
    let r = solve(&p, &tight()).unwrap();
    assert_eq!(r.status, Status::Optimal);
    assert!((r.primal_value() + 3.0).abs() <= 1e-7);
}

#[test]
fn unbounded_program_is_reported() {
    // max 2·X₀₁ s.t. X₀₀ = 1: X₁₁ can grow without limit.
    let mut j = SymMatrix::zeros(2);
    j.set(0, 1, 1.0);
    let mut p = SdpProgram::new(j);
    p.add_eq(SparseMatrix::entry_mask(2, 0, 0), 1.0);
    let r = solve(&p, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Unbounded);
}

#[test]
fn infeasible_program_is_not_optimal() {
    // X₀₀ = -1 has no PSD solution.
    let mut p = SdpProgram::new(SymMatrix::identity(1));
    p.add_eq(SparseMatrix::identity(1), -1.0);
    let r = solve(&p, &SolverConfig::default()).unwrap();
    assert_ne!(r.status, Status::Optimal);
}

#[test]
fn max_iters_is_reported() {
    let cfg = SolverConfig {
        max_iters: 1,
        ..tight()
    };
    let r = solve(&gamma2inf_program(&SignMatrix::hadamard2()), &cfg).unwrap();
    assert_eq!(r.status, Status::MaxIters);
    assert_eq!(r.iterations, 1);
}

#[test]
fn config_validation() {
    let p = one_dim(1.0);
    for cfg in [
        SolverConfig {
            gap_tol: 0.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            feas_tol: -1.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        },
    ] {
        assert!(solve(&p, &cfg).is_err());
    }
}

#[test]
fn malformed_program_is_rejected() {
    let mut p = one_dim(1.0);
    p.add_eq(SparseMatrix::identity(2), 1.0);
    assert!(solve(&p, &SolverConfig::default()).is_err());
}

#[test]
fn dual_slack_examples() {
    let h2 = gamma2inf_program(&SignMatrix::hadamard2());
    let y = vec![0.0; h2.constraints.len()];
    let z = vec![0.0; h2.nonneg.len()];
    let s = dual_slack(&h2, &y, &z, SlackSign::Minus).unwrap();
    assert_eq!(s, h2.objective_sym().scale(-1.0));

    let s = dual_slack(&one_dim(1.0), &[1.0], &[], SlackSign::Minus).unwrap();
    assert_eq!(s.get(0, 0), 0.0);

    assert!(dual_slack(&one_dim(1.0), &[1.0, 2.0], &[], SlackSign::Minus).is_err());
}

#[test]
fn gamma_optimum_has_psd_dual_slack() {
    let h2 = gamma2inf_program(&SignMatrix::hadamard2());
    let r = solve(&h2, &SolverConfig::default()).unwrap();
    assert!(r.is_optimal());
    let s = dual_slack(&h2, &r.solution.y, &r.solution.z, SlackSign::Minus).unwrap();
    assert!(min_eigenvalue(&s).unwrap() >= -1e-7);
    assert!(r.solution.z.iter().all(|z| *z >= -1e-7));
}

#[test]
fn nnls_examples() {
    let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
    let r = nnls(&cols, &[2.0, 0.0, 0.0]).unwrap();
    assert!((r.coeffs[0] - 2.0).abs() <= 1e-12 && r.coeffs[1].abs() <= 1e-12);
    assert!(r.residual <= 1e-12);

    let r = nnls(&cols, &[0.0, 0.0, 3.0]).unwrap();
    assert!(r.coeffs.iter().all(|c| c.abs() <= 1e-12));
    assert!((r.residual - 3.0).abs() <= 1e-12);

    // col₀ - col₁: the negative part cannot be matched.
    let r = nnls(&cols, &[1.0, -1.0, 0.0]).unwrap();
    assert!((r.coeffs[0] - 1.0).abs() <= 1e-12 && r.coeffs[1].abs() <= 1e-12);
    assert!((r.residual - 1.0).abs() <= 1e-12);

    assert!(nnls(&cols, &[1.0, 2.0]).is_err());
}
