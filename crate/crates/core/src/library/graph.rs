use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, SymMatrix};
use crate::model::SdpProgram;

/// Simple undirected graph. Edges are stored as `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// Largest vertex count accepted by [`independence_number`].
pub const INDEPENDENCE_MAX_VERTICES: usize = 24;

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at vertex {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) outside a graph on {n} vertices"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self { n, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self { n, edges }
    }

    pub fn cycle(n: usize) -> Self {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle on at least 3 vertices")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }
}

/// `max 1•X  s.t.  I•X = 1,  X[i][j] = 0 for every edge,  X ⪰ 0`.
pub fn theta_program(g: &Graph) -> SdpProgram {
    let n = g.n();
    let mut p = SdpProgram::new(SymMatrix::from_upper(n, |_, _| 1.0));
    p.add_eq(SparseMatrix::identity(n), 1.0);
    for (i, j) in g.edges() {
        p.add_eq(SparseMatrix::entry_mask(n, i, j), 0.0);
    }
    p
}

/// Size of a largest independent set, by scanning every vertex subset.
pub fn independence_number(g: &Graph) -> Result<usize> {
    let n = g.n();
    if n > INDEPENDENCE_MAX_VERTICES {
        return Err(Error::InvalidInput(format!(
            "independence number brute force limited to {INDEPENDENCE_MAX_VERTICES} vertices, got {n}"
        )));
    }
    let adj: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| g.has_edge(i, j))
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();
    let mut best = 0;
    for set in 0u32..(1u32 << n) {
        let size = set.count_ones() as usize;
        if size <= best {
            continue;
        }
        let independent = (0..n).all(|i| set & (1 << i) == 0 || adj[i] & set == 0);
        if independent {
            best = size;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn edges_are_unordered() {
        let g = Graph::new(3, [(2, 0), (0, 2)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(0, 2) && g.has_edge(2, 0));
    }

    #[test]
    fn independence_numbers_of_small_families() {
        assert_eq!(independence_number(&Graph::empty(4)).unwrap(), 4);
        assert_eq!(independence_number(&Graph::complete(4)).unwrap(), 1);
        assert_eq!(independence_number(&Graph::cycle(5)).unwrap(), 2);
        assert_eq!(independence_number(&Graph::cycle(6)).unwrap(), 3);
    }

    #[test]
    fn theta_census() {
        let p = theta_program(&Graph::cycle(5));
        assert_eq!(p.dim, 5);
        assert_eq!(p.num_eq(), 6);
        assert!(p.nonneg.is_empty());
        assert!(p.validate().is_empty());
    }
}
