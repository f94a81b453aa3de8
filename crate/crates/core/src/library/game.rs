use crate::error::{Error, Result};
use crate::linalg::{hat, Matrix, SparseMatrix, SymMatrix};
use crate::model::SdpProgram;

/// Largest number of deterministic strategy pairs `game_value` will scan.
pub const STRATEGY_LIMIT: f64 = 1e7;
/// Largest answer alphabet for the sign-pattern expansion (`2^{k²}` rows per
/// question pair).
pub const SIGN_PATTERN_MAX_ANSWERS: usize = 3;
const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Two-prover one-round game. Questions and answers are indices;
/// `p[s*T + t]` is the question distribution and
/// `v[((s*T + t)*U + u)*W + w]` the acceptance predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    pub s: usize,
    pub t: usize,
    pub u: usize,
    pub w: usize,
    p: Vec<f64>,
    v: Vec<bool>,
}

impl Game {
    pub fn new(sizes: [usize; 4], p: Vec<f64>, v: Vec<bool>) -> Result<Self> {
        let [s, t, u, w] = sizes;
        if sizes.contains(&0) {
            return Err(Error::InvalidInput(
                "question and answer sets must be non-empty".into(),
            ));
        }
        if p.len() != s * t {
            return Err(Error::InvalidInput(format!(
                "P has {} entries, expected {}",
                p.len(),
                s * t
            )));
        }
        if v.len() != s * t * u * w {
            return Err(Error::InvalidInput(format!(
                "V has {} entries, expected {}",
                v.len(),
                s * t * u * w
            )));
        }
        if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "probability {x} is negative or not finite"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { s, t, u, w, p, v })
    }

    /// Uniform questions, predicate given as a closure.
    pub fn uniform(
        sizes: [usize; 4],
        accept: impl Fn(usize, usize, usize, usize) -> bool,
    ) -> Result<Self> {
        let [s, t, u, w] = sizes;
        let p = vec![1.0 / (s * t) as f64; s * t];
        let mut v = Vec::with_capacity(s * t * u * w);
        for a in 0..s {
            for b in 0..t {
                for x in 0..u {
                    for y in 0..w {
                        v.push(accept(a, b, x, y));
                    }
                }
            }
        }
        Self::new(sizes, p, v)
    }

    /// Uniform questions in `{0,1}²`, accept iff `u xor w == s and t`.
    pub fn xor() -> Self {
        Self::uniform([2, 2, 2, 2], |s, t, u, w| (u ^ w) == (s & t)).expect("valid game")
    }

    /// One question, one answer each, always accepted.
    pub fn trivial() -> Self {
        Self::new([1, 1, 1, 1], vec![1.0], vec![true]).expect("valid game")
    }

    pub fn sizes(&self) -> [usize; 4] {
        [self.s, self.t, self.u, self.w]
    }

    pub fn prob(&self, s: usize, t: usize) -> f64 {
        self.p[s * self.t + t]
    }

    pub fn accepts(&self, s: usize, t: usize, u: usize, w: usize) -> bool {
        self.v[((s * self.t + t) * self.u + u) * self.w + w]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn predicate(&self) -> &[bool] {
        &self.v
    }

    /// `C[(s,u),(t,w)] = P(s,t)·V(s,t,u,w)`, rows `s*U + u`, columns `t*W + w`.
    pub fn payoff_matrix(&self) -> Matrix {
        Matrix::from_fn(self.s * self.u, self.t * self.w, |r, c| {
            let (s, u) = (r / self.u, r % self.u);
            let (t, w) = (c / self.w, c % self.w);
            if self.accepts(s, t, u, w) {
                self.prob(s, t)
            } else {
                0.0
            }
        })
    }

    fn strategy_pairs(&self) -> f64 {
        (self.u as f64).powi(self.s as i32) * (self.w as f64).powi(self.t as i32)
    }
}

/// `ω(G)`: the best acceptance probability over deterministic strategies.
///
/// Enumerates every Alice strategy `a: S → U`; Bob's best response is then
/// independent per question, so the maximum is exact.
pub fn game_value(g: &Game) -> Result<f64> {
    let pairs = g.strategy_pairs();
    if pairs > STRATEGY_LIMIT {
        return Err(Error::StrategySpaceTooLarge {
            pairs,
            limit: STRATEGY_LIMIT,
        });
    }
    let mut a = vec![0usize; g.s];
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut total = 0.0;
        for t in 0..g.t {
            let mut bob = f64::NEG_INFINITY;
            for w in 0..g.w {
                let mut acc = 0.0;
                for (s, &u) in a.iter().enumerate() {
                    if g.accepts(s, t, u, w) {
                        acc += g.prob(s, t);
                    }
                }
                bob = bob.max(acc);
            }
            total += bob;
        }
        best = best.max(total);
        // Odometer increment over U^S.
        let mut k = 0;
        while k < g.s {
            a[k] += 1;
            if a[k] < g.u {
                break;
            }
            a[k] = 0;
            k += 1;
        }
        if k == g.s {
            return Ok(best);
        }
    }
}

/// Parallel play of two games: questions and answers are pairs, indexed
/// `x1 * |X2| + x2`.
pub fn game_product(g1: &Game, g2: &Game) -> Game {
    let [s, t, u, w] = [g1.s * g2.s, g1.t * g2.t, g1.u * g2.u, g1.w * g2.w];
    let mut p = Vec::with_capacity(s * t);
    for s1 in 0..g1.s {
        for s2 in 0..g2.s {
            for t1 in 0..g1.t {
                for t2 in 0..g2.t {
                    p.push(g1.prob(s1, t1) * g2.prob(s2, t2));
                }
            }
        }
    }
    let mut v = vec![false; s * t * u * w];
    for sp in 0..s {
        for tp in 0..t {
            for up in 0..u {
                for wp in 0..w {
                    let ok = g1.accepts(sp / g2.s, tp / g2.t, up / g2.u, wp / g2.w)
                        && g2.accepts(sp % g2.s, tp % g2.t, up % g2.u, wp % g2.w);
                    v[((sp * t + tp) * u + up) * w + wp] = ok;
                }
            }
        }
    }
    Game { s, t, u, w, p, v }
}

/// Index of `(s, u)` on Alice's side and `(t, w)` on Bob's side of `X`.
struct Layout {
    alice: usize,
    u: usize,
    w: usize,
}

impl Layout {
    fn of(g: &Game) -> Self {
        Self {
            alice: g.s * g.u,
            u: g.u,
            w: g.w,
        }
    }

    fn a(&self, s: usize, u: usize) -> usize {
        s * self.u + u
    }

    fn b(&self, t: usize, w: usize) -> usize {
        self.alice + t * self.w + w
    }
}

fn half_hat_payoff(g: &Game) -> SymMatrix {
    hat(&g.payoff_matrix()).scale(0.5)
}

/// `σ(G)`: `max ½Ĉ•X  s.t.  X•B_qr = 1 for all questions q <= r in S ∪ T,
/// X >= 0 entrywise,  X ⪰ 0`.
///
/// `B_qr` is the symmetrized all-ones mask of the `(q, r)` block, so
/// `X•B_qr` is the sum of that block. Questions are ordered S then T.
pub fn fl_sigma_program(g: &Game) -> SdpProgram {
    let lay = Layout::of(g);
    let d = lay.alice + g.t * g.w;
    let blocks: Vec<Vec<usize>> = (0..g.s)
        .map(|s| (0..g.u).map(|u| lay.a(s, u)).collect())
        .chain((0..g.t).map(|t| (0..g.w).map(|w| lay.b(t, w)).collect()))
        .collect();
    let mut p = SdpProgram::new(half_hat_payoff(g));
    for a in 0..blocks.len() {
        for b in a..blocks.len() {
            let mut trip = Vec::new();
            for &i in &blocks[a] {
                for &j in &blocks[b] {
                    trip.push((i, j, 0.5));
                    trip.push((j, i, 0.5));
                }
            }
            p.add_eq(
                SparseMatrix::from_triplets(d, d, trip).expect("indices in range"),
                1.0,
            );
        }
    }
    for i in 0..d {
        for j in i..d {
            p.add_nonneg(SparseMatrix::entry_mask(d, i, j));
        }
    }
    p
}

/// `σ̄′(G)`: `max ½Ĉ•X` subject to, for every question pair `q <= q'` on
/// the same side and every sign pattern `x`,
/// `Σ_{u,w} (-1)^{x_uw} X[(q,u),(q',w)] <= 1`, plus
/// `X[(s,u),(t,w)] >= 0` across the two sides and `X ⪰ 0`.
///
/// Patterns are enumerated in binary order with `x_uw` at bit
/// `k² - 1 - (u*k + w)`, so pattern 0 is all plus. Non-negativity rows are
/// ordered by `(s, u, t, w)`, which makes `vec(C)` the span witness.
pub fn fl_sigma_bar_prime_program(g: &Game) -> Result<SdpProgram> {
    for size in [g.u, g.w] {
        if size > SIGN_PATTERN_MAX_ANSWERS {
            return Err(Error::AnswerSetTooLarge {
                size,
                limit: SIGN_PATTERN_MAX_ANSWERS,
            });
        }
    }
    let lay = Layout::of(g);
    let d = lay.alice + g.t * g.w;
    let mut p = SdpProgram::new(half_hat_payoff(g));
    type Index<'a> = Box<dyn Fn(usize, usize) -> usize + 'a>;
    let sides: [(usize, usize, Index); 2] = [
        (g.s, g.u, Box::new(|q, a| lay.a(q, a))),
        (g.t, g.w, Box::new(|q, a| lay.b(q, a))),
    ];
    for (questions, k, index) in &sides {
        let (questions, k) = (*questions, *k);
        let bits = k * k;
        for q in 0..questions {
            for q2 in q..questions {
                for x in 0u32..(1u32 << bits) {
                    let mut trip = Vec::with_capacity(2 * bits);
                    for a in 0..k {
                        for b in 0..k {
                            let bit = bits - 1 - (a * k + b);
                            let sign = if x >> bit & 1 == 1 { -1.0 } else { 1.0 };
                            let (i, j) = (index(q, a), index(q2, b));
                            trip.push((i, j, 0.5 * sign));
                            trip.push((j, i, 0.5 * sign));
                        }
                    }
                    p.add_le(
                        SparseMatrix::from_triplets(d, d, trip).expect("indices in range"),
                        1.0,
                    );
                }
            }
        }
    }
    for s in 0..g.s {
        for u in 0..g.u {
            for t in 0..g.t {
                for w in 0..g.w {
                    p.add_nonneg(SparseMatrix::entry_mask(d, lay.a(s, u), lay.b(t, w)));
                }
            }
        }
    }
    Ok(p)
}

/// `max over question pairs (q <= q') on one side of Σ_{u,w} |X[(q,u),(q',w)]|`.
/// The σ̄ constraints ask for this to be at most one.
pub fn sigma_bar_abs_sum(g: &Game, x: &SymMatrix) -> Result<f64> {
    let lay = Layout::of(g);
    let d = lay.alice + g.t * g.w;
    if x.dim() != d {
        return Err(crate::error::dim_mismatch(
            "σ̄ iterate",
            (x.dim(), x.dim()),
            (d, d),
        ));
    }
    let mut worst = f64::NEG_INFINITY;
    for q in 0..g.s {
        for q2 in q..g.s {
            let sum: f64 = (0..g.u)
                .flat_map(|a| (0..g.u).map(move |b| (a, b)))
                .map(|(a, b)| x.get(lay.a(q, a), lay.a(q2, b)).abs())
                .sum();
            worst = worst.max(sum);
        }
    }
    for q in 0..g.t {
        for q2 in q..g.t {
            let sum: f64 = (0..g.w)
                .flat_map(|a| (0..g.w).map(move |b| (a, b)))
                .map(|(a, b)| x.get(lay.b(q, a), lay.b(q2, b)).abs())
                .sum();
            worst = worst.max(sum);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_games() {
        let yes = Game::uniform([2, 2, 2, 2], |_, _, _, _| true).unwrap();
        let no = Game::uniform([2, 2, 2, 2], |_, _, _, _| false).unwrap();
        assert_eq!(game_value(&yes).unwrap(), 1.0);
        assert_eq!(game_value(&no).unwrap(), 0.0);
    }

    /// Oracle: enumerate both strategies in full.
    fn value_by_pairs(g: &Game) -> f64 {
        let na = g.u.pow(g.s as u32);
        let nb = g.w.pow(g.t as u32);
        let mut best: f64 = 0.0;
        for ca in 0..na {
            for cb in 0..nb {
                let a = |s: usize| ca / g.u.pow(s as u32) % g.u;
                let b = |t: usize| cb / g.w.pow(t as u32) % g.w;
                let mut v = 0.0;
                for s in 0..g.s {
                    for t in 0..g.t {
                        if g.accepts(s, t, a(s), b(t)) {
                            v += g.prob(s, t);
                        }
                    }
                }
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn xor_value_by_full_enumeration() {
        let g = Game::xor();
        assert_eq!(value_by_pairs(&g), 0.75);
        assert_eq!(game_value(&g).unwrap(), 0.75);
    }

    #[test]
    fn xor_square() {
        let g = game_product(&Game::xor(), &Game::xor());
        assert_eq!(g.sizes(), [4, 4, 4, 4]);
        assert!((g.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let v = game_value(&g).unwrap();
        assert_eq!(v, value_by_pairs(&g));
        assert!(v >= 0.75 * 0.75);
        assert_eq!(v, 0.625);
    }

    #[test]
    fn product_with_trivial_game_is_identity() {
        let g = Game::xor();
        assert_eq!(game_product(&g, &Game::trivial()), g);
        assert_eq!(game_product(&Game::trivial(), &g), g);
    }

    #[test]
    fn strategy_cap() {
        let g = Game::uniform([12, 12, 4, 4], |_, _, _, _| true).unwrap();
        assert!(matches!(
            game_value(&g),
            Err(Error::StrategySpaceTooLarge { .. })
        ));
    }

    #[test]
    fn invalid_games() {
        assert!(Game::new([1, 1, 1, 1], vec![0.5], vec![true]).is_err());
        assert!(Game::new([1, 1, 1, 1], vec![1.0], vec![]).is_err());
        assert!(Game::new([1, 2, 1, 1], vec![1.5, -0.5], vec![true, true]).is_err());
    }

    #[test]
    fn sigma_census() {
        let p = fl_sigma_program(&Game::xor());
        assert_eq!(p.dim, 8);
        assert_eq!(p.num_eq(), 10);
        assert_eq!(p.nonneg.len(), 36);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn sigma_bar_prime_census() {
        let p = fl_sigma_bar_prime_program(&Game::xor()).unwrap();
        assert_eq!(p.dim, 8);
        // 3 question pairs per side, 16 patterns each.
        assert_eq!(p.num_le(), 2 * 3 * 16);
        assert_eq!(p.nonneg.len(), 16);
        assert!(p.validate().is_empty());
        let big = Game::uniform([1, 1, 4, 1], |_, _, _, _| true).unwrap();
        assert!(matches!(
            fl_sigma_bar_prime_program(&big),
            Err(Error::AnswerSetTooLarge { .. })
        ));
    }
}
