use std::f64::consts::PI;

use sdp_product::library::{
    counterexample_program, fl_sigma_bar_prime_program, fl_sigma_program, game_product, game_value,
    gamma2inf_program, independence_number, sigma_bar_abs_sum, theta_odd_cycle, theta_program,
    Game, Graph, SignMatrix,
};
use sdp_product::linalg::{SparseMatrix, SymMatrix};
use sdp_product::{solve, SolverConfig};

fn value(p: &sdp_product::SdpProgram) -> f64 {
    let r = solve(
        p,
        &SolverConfig {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert!(r.is_optimal(), "{}", r.status);
    r.primal_value()
}

#[test]
fn theta_examples() {
    for n in 1..=5 {
        assert!((value(&theta_program(&Graph::empty(n))) - n as f64).abs() <= 1e-6);
    }
    assert!((value(&theta_program(&Graph::complete(3))) - 1.0).abs() <= 1e-6);
    for n in [5, 7] {
        let c = (PI / n as f64).cos();
        let oracle = n as f64 * c / (1.0 + c);
        assert!((value(&theta_program(&Graph::cycle(n))) - oracle).abs() <= 1e-6);
        assert!((theta_odd_cycle(n) - oracle).abs() <= 1e-12);
    }
    assert!((value(&theta_program(&Graph::cycle(5))) - 5f64.sqrt()).abs() <= 1e-4);
}

#[test]
fn theta_program_census() {
    let p = theta_program(&Graph::cycle(5));
    assert_eq!(p.dim, 5);
    assert_eq!(p.num_eq(), 6);
    assert!(p.nonneg.is_empty());
    assert!(p.all_equalities());
}

#[test]
fn graph_validation() {
    assert!(Graph::new(3, [(0, 0)]).is_err());
    assert!(Graph::new(3, [(0, 3)]).is_err());
    let g = Graph::new(3, [(2, 0), (0, 2)]).unwrap();
    assert_eq!(g.num_edges(), 1);
    assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
}

#[test]
fn independence_examples() {
    assert_eq!(independence_number(&Graph::cycle(5)).unwrap(), 2);
    assert_eq!(independence_number(&Graph::complete(4)).unwrap(), 1);
    assert_eq!(independence_number(&Graph::empty(6)).unwrap(), 6);
    assert_eq!(independence_number(&Graph::empty(0)).unwrap(), 0);
}

#[test]
fn gamma_one_by_one_matches_parametric_search() {
    // Feasible set: X = [[a, c], [c, 1-a]], c >= 0, c² <= a(1-a); value 2c.
    let mut best = 0.0f64;
    for k in 0..=10_000 {
        let a = k as f64 * 1e-4;
        best = best.max(2.0 * (a * (1.0 - a)).sqrt());
    }
    let v = value(&gamma2inf_program(
        &SignMatrix::from_rows(&[vec![1.0]]).unwrap(),
    ));
    assert!((v - best).abs() <= 1e-4, "{v} vs {best}");
    assert!((best - 1.0).abs() <= 1e-8);
}

#[test]
fn gamma_all_ones_two_by_two_is_one() {
    // Primal X supported on {row 0, column 0} with entries ½ reaches 1. Dual
    // y = 1 on the trace row with same-block multiplier 1 gives the slack
    // [[A, -N], [-N, A]], A = N = all-ones 2×2, which is PSD. So the value is 1.
    let m = SignMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let p = gamma2inf_program(&m);
    let mut x = SymMatrix::zeros(4);
    x.set(0, 0, 0.5);
    x.set(2, 2, 0.5);
    x.set(0, 2, 0.5);
    assert!(p.max_violation(&x) <= 1e-12);
    assert!((p.objective_value(&x) - 1.0).abs() <= 1e-12);
    assert!((value(&p) - 1.0).abs() <= 1e-4);
}

#[test]
fn gamma_program_census() {
    let p = gamma2inf_program(&SignMatrix::from_rows(&[vec![1.0]]).unwrap());
    assert_eq!((p.dim, p.num_eq(), p.nonneg.len()), (2, 1, 2));
    assert_eq!(p.nonneg[0], p.nonneg[1]);
    assert!(SignMatrix::from_rows(&[vec![1.0, 0.5]]).is_err());
    assert!(SignMatrix::from_rows(&[]).is_err());
}

#[test]
fn counterexample_shape() {
    let p = counterexample_program();
    assert_eq!(p.dim, 2);
    assert_eq!(p.objective.get(0, 1), -1.0);
    assert_eq!(p.objective.get(0, 0), 0.0);
    assert_eq!(p.constraints[0].matrix, SparseMatrix::identity(2));
    assert_eq!(p.nonneg.len(), 2);
}

#[test]
fn game_value_examples() {
    let ones = Game::uniform([2, 2, 2, 2], |_, _, _, _| true).unwrap();
    let zeros = Game::uniform([2, 2, 2, 2], |_, _, _, _| false).unwrap();
    assert_eq!(game_value(&ones).unwrap(), 1.0);
    assert_eq!(game_value(&zeros).unwrap(), 0.0);
    let xor = Game::xor();
    assert_eq!(game_value(&xor).unwrap(), 0.75);
    let squared = game_product(&xor, &xor);
    assert_eq!(squared.sizes(), [4, 4, 4, 4]);
    assert_eq!(game_value(&squared).unwrap(), 0.625);
}

#[test]
fn product_with_trivial_game_is_isomorphic() {
    let xor = Game::xor();
    let g = game_product(&xor, &Game::trivial());
    assert_eq!(g.sizes(), xor.sizes());
    assert_eq!(g.probabilities(), xor.probabilities());
    assert_eq!(g.predicate(), xor.predicate());
}

#[test]
fn game_validation() {
    assert!(Game::new([1, 1, 1, 1], vec![0.5], vec![true]).is_err());
    assert!(Game::new([1, 1, 1, 1], vec![1.0], vec![]).is_err());
    assert!(Game::new([1, 2, 1, 1], vec![1.5, -0.5], vec![true, true]).is_err());
}

#[test]
fn sigma_examples() {
    let ones = Game::uniform([2, 2, 2, 2], |_, _, _, _| true).unwrap();
    assert!((value(&fl_sigma_program(&ones)) - 1.0).abs() <= 1e-6);
    let xor = Game::xor();
    let sigma = value(&fl_sigma_program(&xor));
    assert!(sigma >= 0.75 - 1e-6);
    // The quantum value of this game: cos²(π/8).
    assert!((sigma - (PI / 8.0).cos().powi(2)).abs() <= 1e-6);
}

#[test]
fn sigma_bar_prime_examples() {
    let xor = Game::xor();
    let p = fl_sigma_bar_prime_program(&xor).unwrap();
    let r = solve(
        &p,
        &SolverConfig {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert!(r.is_optimal());
    let sigma = value(&fl_sigma_program(&xor));
    assert!(r.primal_value() >= sigma - 1e-6);
    // The sign patterns encode the absolute-value constraint exactly.
    let abs = sigma_bar_abs_sum(&xor, &r.solution.x).unwrap();
    assert!(abs <= 1.0 + 1e-6, "{abs}");

    let big = Game::uniform([1, 1, 4, 4], |_, _, _, _| true).unwrap();
    assert!(fl_sigma_bar_prime_program(&big).is_err());
}
