//! Builders for the concrete programs and their brute-force oracles.

mod game;
mod graph;
mod sign;

pub use game::{
    fl_sigma_bar_prime_program, fl_sigma_program, game_product, game_value, sigma_bar_abs_sum,
    Game, SIGN_PATTERN_MAX_ANSWERS, STRATEGY_LIMIT,
};
pub use graph::{independence_number, theta_program, Graph, INDEPENDENCE_MAX_VERTICES};
pub use sign::{counterexample_program, gamma2inf_program, SignMatrix};

/// `n·cos(π/n) / (1 + cos(π/n))`, the theta value of the odd cycle `C_n`.
pub fn theta_odd_cycle(n: usize) -> f64 {
    let c = (std::f64::consts::PI / n as f64).cos();
    n as f64 * c / (1.0 + c)
}
