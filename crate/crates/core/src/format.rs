//! Text formats for programs, graphs, sign matrices and games.
//!
//! Program file:
//!
//! ```text
//! DIM 2
//! OBJECTIVE
//! 0 1 -1.0000000000000000e0
//! END
//! EQ 1.0000000000000000e0
//! 0 0 1.0000000000000000e0
//! 1 1 1.0000000000000000e0
//! END
//! NONNEG
//! 0 1 5.0000000000000000e-1
//! END
//! ```
//!
//! Each block lists the upper triangle as `i j value` with `i <= j`; the
//! lower triangle is implied. `LE rhs` blocks are inequality rows. Blank
//! lines and lines starting with `#` are ignored everywhere.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::library::{Game, Graph, SignMatrix};
use crate::linalg::{Matrix, SparseMatrix, SymMatrix};
use crate::model::{Relation, SdpProgram};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_upper(out: &mut String, entries: impl Iterator<Item = (usize, usize, f64)>) {
    for (i, j, v) in entries {
        if i <= j && v != 0.0 {
            let _ = writeln!(out, "{i} {j} {}", num(v));
        }
    }
}

/// Canonical text of `p`: equalities before inequalities (stable), triples
/// sorted by `(i, j)`.
pub fn emit_program(p: &SdpProgram) -> String {
    let mut q = p.clone();
    q.canonicalize();
    let d = q.dim;
    let mut out = String::new();
    let _ = writeln!(out, "DIM {d}");
    out.push_str("OBJECTIVE\n");
    write_upper(
        &mut out,
        (0..d)
            .flat_map(|i| (i..d).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, q.objective.get(i, j))),
    );
    out.push_str("END\n");
    for c in &q.constraints {
        let tag = match c.relation {
            Relation::Eq => "EQ",
            Relation::Le => "LE",
        };
        let _ = writeln!(out, "{tag} {}", num(c.rhs));
        write_upper(&mut out, c.matrix.entries().iter().copied());
        out.push_str("END\n");
    }
    for b in &q.nonneg {
        out.push_str("NONNEG\n");
        write_upper(&mut out, b.entries().iter().copied());
        out.push_str("END\n");
    }
    out
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| perr(line, format!("invalid number '{tok}'")))?;
    if !v.is_finite() {
        return Err(perr(line, format!("non-finite number '{tok}'")));
    }
    Ok(v)
}

fn parse_usize(line: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| perr(line, format!("invalid index '{tok}'")))
}

enum Block {
    Objective,
    Constraint(Relation, f64),
    Nonneg,
}

pub fn parse_program(text: &str) -> Result<SdpProgram> {
    let mut lines = content_lines(text);
    let (l0, first) = lines.next().ok_or_else(|| perr(0, "empty program file"))?;
    let dim = match first.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["DIM", n] => parse_usize(l0, n)?,
        _ => return Err(perr(l0, "expected 'DIM n'")),
    };
    if dim == 0 {
        return Err(perr(l0, "dimension must be positive"));
    }
    let mut objective: Option<Matrix> = None;
    let mut p = SdpProgram::new(SymMatrix::zeros(dim));
    type Open = (Block, usize, Vec<(usize, usize, f64)>);
    let mut current: Option<Open> = None;
    let mut last_line = l0;
    for (ln, line) in lines {
        last_line = ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if let Some((block, start, trip)) = current.as_mut() {
            if toks == ["END"] {
                let m = SparseMatrix::from_triplets(dim, dim, mirrored(*start, trip)?)
                    .map_err(|e| perr(*start, e.to_string()))?;
                match block {
                    Block::Objective => {
                        if objective.is_some() {
                            return Err(perr(*start, "duplicate OBJECTIVE block"));
                        }
                        objective = Some(m.to_dense());
                    }
                    Block::Constraint(Relation::Eq, rhs) => {
                        p.add_eq(m, *rhs);
                    }
                    Block::Constraint(Relation::Le, rhs) => {
                        p.add_le(m, *rhs);
                    }
                    Block::Nonneg => {
                        p.add_nonneg(m);
                    }
                }
                current = None;
                continue;
            }
            let [i, j, v] = toks.as_slice() else {
                return Err(perr(ln, "expected 'i j value' or END"));
            };
            let (i, j, v) = (parse_usize(ln, i)?, parse_usize(ln, j)?, parse_f64(ln, v)?);
            if i >= dim || j >= dim {
                return Err(perr(
                    ln,
                    format!("index ({i}, {j}) outside dimension {dim}"),
                ));
            }
            trip.push((i.min(j), i.max(j), v));
            continue;
        }
        let block = match toks.as_slice() {
            ["OBJECTIVE"] => Block::Objective,
            ["EQ", rhs] => Block::Constraint(Relation::Eq, parse_f64(ln, rhs)?),
            ["LE", rhs] => Block::Constraint(Relation::Le, parse_f64(ln, rhs)?),
            ["NONNEG"] => Block::Nonneg,
            _ => {
                return Err(perr(
                    ln,
                    format!("unexpected '{line}', expected OBJECTIVE, EQ, LE or NONNEG"),
                ))
            }
        };
        current = Some((block, ln, Vec::new()));
    }
    if let Some((_, start, _)) = current {
        return Err(perr(
            last_line,
            format!("block starting at line {start} has no END"),
        ));
    }
    p.objective = objective.ok_or_else(|| perr(last_line, "missing OBJECTIVE block"))?;
    Ok(p)
}

/// Expands upper-triangle triples to both triangles, rejecting a position
/// given twice.
fn mirrored(start: usize, trip: &mut [(usize, usize, f64)]) -> Result<Vec<(usize, usize, f64)>> {
    trip.sort_by_key(|&(i, j, _)| (i, j));
    if let Some(w) = trip
        .windows(2)
        .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
    {
        return Err(perr(
            start,
            format!("entry ({}, {}) given twice in block", w[0].0, w[0].1),
        ));
    }
    let mut all = Vec::with_capacity(2 * trip.len());
    for &(i, j, v) in trip.iter() {
        all.push((i, j, v));
        if i != j {
            all.push((j, i, v));
        }
    }
    Ok(all)
}

/// `n` on the first line, then one `i j` edge per line.
pub fn emit_graph(g: &Graph) -> String {
    let mut out = format!("{}\n", g.n());
    for (i, j) in g.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text);
    let (l0, first) = lines.next().ok_or_else(|| perr(0, "empty graph file"))?;
    let n = parse_usize(l0, first)?;
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [i, j] = toks.as_slice() else {
            return Err(perr(ln, "expected 'i j'"));
        };
        let (i, j) = (parse_usize(ln, i)?, parse_usize(ln, j)?);
        if i == j || i >= n || j >= n {
            return Err(perr(
                ln,
                format!("invalid edge ({i}, {j}) for {n} vertices"),
            ));
        }
        edges.push((i, j));
    }
    Graph::new(n, edges)
}

/// `rows cols` on the first line, then one row of `1`/`-1` per line.
pub fn emit_sign_matrix(m: &SignMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| format!("{}", m.matrix().get(i, j)))
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn parse_sign_matrix(text: &str) -> Result<SignMatrix> {
    let mut lines = content_lines(text);
    let (l0, first) = lines
        .next()
        .ok_or_else(|| perr(0, "empty sign matrix file"))?;
    let toks: Vec<&str> = first.split_whitespace().collect();
    let [r, c] = toks.as_slice() else {
        return Err(perr(l0, "expected 'rows cols'"));
    };
    let (r, c) = (parse_usize(l0, r)?, parse_usize(l0, c)?);
    let mut rows = Vec::with_capacity(r);
    let mut last = l0;
    for (ln, line) in lines {
        last = ln;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| match t {
                "1" | "+1" => Ok(1.0),
                "-1" => Ok(-1.0),
                _ => Err(perr(ln, format!("entry '{t}' is not 1 or -1"))),
            })
            .collect::<Result<_>>()?;
        if row.len() != c {
            return Err(perr(
                ln,
                format!("row has {} entries, expected {c}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != r {
        return Err(perr(
            last,
            format!("found {} rows, expected {r}", rows.len()),
        ));
    }
    SignMatrix::from_rows(&rows).map_err(|e| perr(l0, e.to_string()))
}

/// ```text
/// SIZES |S| |T| |U| |W|
/// P
/// <|S| lines of |T| probabilities>
/// V
/// <|S|·|T| lines, one per (s, t) in s-major order, of |U|·|W| bits, u-major>
/// ```
pub fn emit_game(g: &Game) -> String {
    let [s, t, u, w] = g.sizes();
    let mut out = format!("SIZES {s} {t} {u} {w}\nP\n");
    for a in 0..s {
        let row: Vec<String> = (0..t).map(|b| format!("{}", g.prob(a, b))).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out.push_str("V\n");
    for a in 0..s {
        for b in 0..t {
            let bits: Vec<&str> = (0..u)
                .flat_map(|x| (0..w).map(move |y| (x, y)))
                .map(|(x, y)| if g.accepts(a, b, x, y) { "1" } else { "0" })
                .collect();
            let _ = writeln!(out, "{}", bits.join(" "));
        }
    }
    out
}

pub fn parse_game(text: &str) -> Result<Game> {
    let mut lines = content_lines(text);
    let (l0, first) = lines.next().ok_or_else(|| perr(0, "empty game file"))?;
    let toks: Vec<&str> = first.split_whitespace().collect();
    let ["SIZES", rest @ ..] = toks.as_slice() else {
        return Err(perr(l0, "expected 'SIZES |S| |T| |U| |W|'"));
    };
    let sizes: Vec<usize> = rest
        .iter()
        .map(|x| parse_usize(l0, x))
        .collect::<Result<_>>()?;
    let [s, t, u, w] = sizes[..] else {
        return Err(perr(l0, "expected four sizes"));
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| perr(l0, format!("game file ends before {what}")))
    };
    let (ln, tag) = next("'P'")?;
    if tag != "P" {
        return Err(perr(ln, format!("expected 'P', found '{tag}'")));
    }
    let mut p = Vec::with_capacity(s * t);
    for _ in 0..s {
        let (ln, line) = next("the end of the P section")?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|x| parse_f64(ln, x))
            .collect::<Result<_>>()?;
        if row.len() != t {
            return Err(perr(
                ln,
                format!("P row has {} entries, expected {t}", row.len()),
            ));
        }
        p.extend(row);
    }
    let (ln, tag) = next("'V'")?;
    if tag != "V" {
        return Err(perr(ln, format!("expected 'V', found '{tag}'")));
    }
    let mut v = Vec::with_capacity(s * t * u * w);
    for _ in 0..s * t {
        let (ln, line) = next("the end of the V section")?;
        let bits: Vec<bool> = line
            .split_whitespace()
            .map(|x| match x {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(perr(ln, format!("predicate entry '{x}' is not 0 or 1"))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != u * w {
            return Err(perr(
                ln,
                format!("V row has {} entries, expected {}", bits.len(), u * w),
            ));
        }
        v.extend(bits);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "trailing content after V section"));
    }
    Game::new([s, t, u, w], p, v).map_err(|e| perr(l0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::*;
    use crate::model::product;

    #[test]
    fn program_round_trips() {
        let g = Game::xor();
        let programs = vec![
            counterexample_program(),
            product(&counterexample_program(), &counterexample_program()).unwrap(),
            theta_program(&Graph::cycle(5)),
            gamma2inf_program(&SignMatrix::hadamard2()),
            fl_sigma_program(&g),
            fl_sigma_bar_prime_program(&g).unwrap(),
        ];
        for p in programs {
            let text = emit_program(&p);
            let back = parse_program(&text).unwrap();
            assert_eq!(back, p);
            assert_eq!(emit_program(&back), text);
        }
    }

    #[test]
    fn odd_values_round_trip_exactly() {
        let mut j = SymMatrix::zeros(2);
        j.set(0, 1, 0.1 + 0.2);
        j.set(1, 1, -1e-300);
        let mut p = SdpProgram::new(j);
        p.add_le(
            SparseMatrix::identity(2).scale(std::f64::consts::PI),
            1.0 / 3.0,
        );
        let back = parse_program(&emit_program(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn emit_orders_equalities_first() {
        let mut p = SdpProgram::new(SymMatrix::identity(1));
        p.add_le(SparseMatrix::identity(1), 2.0);
        p.add_eq(SparseMatrix::identity(1), 1.0);
        let back = parse_program(&emit_program(&p)).unwrap();
        assert_eq!(back.constraints[0].relation, Relation::Eq);
        assert!(back.is_canonical());
    }

    fn parse_line(text: &str) -> usize {
        match parse_program(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(parse_line("DIM x\n"), 1);
        assert_eq!(parse_line("DIM 2\nOBJECTIVE\n0 1 zz\nEND\n"), 3);
        assert_eq!(parse_line("DIM 2\n\nOBJECTIVE\n0 5 1\nEND\n"), 4);
        assert_eq!(parse_line("DIM 2\nOBJECTIVE\n0 1 1\n"), 3);
        assert_eq!(parse_line("DIM 2\nBOGUS\n"), 2);
        assert_eq!(parse_line("DIM 2\nOBJECTIVE\n0 1 1\n1 0 2\nEND\n"), 2);
    }

    #[test]
    fn graph_round_trip() {
        let g = Graph::new(6, [(0, 1), (4, 2), (5, 0)]).unwrap();
        let text = emit_graph(&g);
        assert_eq!(parse_graph(&text).unwrap(), g);
        assert_eq!(emit_graph(&parse_graph(&text).unwrap()), text);
        assert!(parse_graph("3\n0 0\n").is_err());
    }

    #[test]
    fn sign_matrix_round_trip() {
        let m = SignMatrix::from_rows(&[vec![1.0, -1.0, 1.0], vec![-1.0, -1.0, 1.0]]).unwrap();
        let text = emit_sign_matrix(&m);
        assert_eq!(parse_sign_matrix(&text).unwrap(), m);
        assert!(parse_sign_matrix("1 2\n1 0\n").is_err());
    }

    #[test]
    fn game_round_trip() {
        let mut p = vec![0.1, 0.2, 0.3];
        p.push(1.0 - p.iter().sum::<f64>());
        let g = Game::new(
            [2, 2, 1, 2],
            p,
            vec![true, false, false, true, true, true, false, false],
        )
        .unwrap();
        for g in [g, Game::xor(), game_product(&Game::xor(), &Game::xor())] {
            let text = emit_game(&g);
            assert_eq!(parse_game(&text).unwrap(), g);
        }
        assert!(parse_game("SIZES 1 1 1 1\nP\n1\nV\n2\n").is_err());
    }
}
