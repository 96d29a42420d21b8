use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Outcome of checking whether the position-wise map between two node
/// windows is an isomorphism of their induced subgraphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum WindowVerdict {
    Isomorphism,
    /// Positions `a`, `b` coincide in one window but not the other.
    NotAMap { a: usize, b: usize },
    /// Positions `a`, `b` are adjacent in one graph but not the other.
    EdgeMismatch { a: usize, b: usize },
}

impl WindowVerdict {
    pub fn holds(self) -> bool {
        self == WindowVerdict::Isomorphism
    }
}

/// Decides whether `w1[i] ↦ w2[i]` is a well-defined bijection between the
/// node sets of the windows that maps the induced subgraph `g1[w1]` onto
/// `g2[w2]`, by checking every pair of positions.
pub fn walklet_subgraph_oracle(g1: &Graph, w1: &[usize], g2: &Graph, w2: &[usize]) -> Result<WindowVerdict> {
    if w1.len() != w2.len() {
        return Err(Error::invalid("windows differ in length"));
    }
    if w1.iter().any(|&v| v >= g1.n_nodes()) || w2.iter().any(|&v| v >= g2.n_nodes()) {
        return Err(Error::invalid("window node out of range"));
    }
    for a in 0..w1.len() {
        for b in a + 1..w1.len() {
            if (w1[a] == w1[b]) != (w2[a] == w2[b]) {
                return Ok(WindowVerdict::NotAMap { a, b });
            }
            if g1.is_edge(w1[a], w1[b]) != g2.is_edge(w2[a], w2[b]) {
                return Ok(WindowVerdict::EdgeMismatch { a, b });
            }
        }
    }
    Ok(WindowVerdict::Isomorphism)
}

/// Counts of closed walks of length 1..=k, an isomorphism invariant.
fn closed_walk_counts(g: &Graph, k: usize) -> Vec<u128> {
    let n = g.n_nodes();
    let mut totals = Vec::with_capacity(k);
    let mut counts = vec![vec![0u128; n]; n];
    for (v, row) in counts.iter_mut().enumerate() {
        row[v] = 1;
    }
    for _ in 0..k {
        let mut next = vec![vec![0u128; n]; n];
        for (src, row) in counts.iter().enumerate() {
            for v in 0..n {
                if row[v] == 0 {
                    continue;
                }
                for &u in g.neighbors(v) {
                    next[src][u] += row[v];
                }
            }
        }
        counts = next;
        totals.push((0..n).map(|v| counts[v][v]).sum());
    }
    totals
}

/// Returns a node bijection `f` with `uv ∈ E(g1) ⇔ f(u)f(v) ∈ E(g2)`, if
/// one exists. Backtracking search in breadth-first order with degree and
/// adjacency pruning, after cheap invariant checks.
pub fn find_isomorphism(g1: &Graph, g2: &Graph) -> Option<Vec<usize>> {
    let n = g1.n_nodes();
    if n != g2.n_nodes() || g1.n_edges() != g2.n_edges() {
        return None;
    }
    let mut d1 = g1.degrees();
    let mut d2 = g2.degrees();
    d1.sort_unstable();
    d2.sort_unstable();
    if d1 != d2 || closed_walk_counts(g1, 8) != closed_walk_counts(g2, 8) {
        return None;
    }
    // visit order: breadth-first per component, so most nodes have a mapped
    // neighbor when reached
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut head = order.len();
        order.push(root);
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &u in g1.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    order.push(u);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if assign(g1, g2, &order, 0, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

fn assign(g1: &Graph, g2: &Graph, order: &[usize], depth: usize, map: &mut [usize], used: &mut [bool]) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let anchor = g1.neighbors(v).iter().copied().find(|&u| map[u] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(u) => g2.neighbors(map[u]).to_vec(),
        None => (0..g2.n_nodes()).collect(),
    };
    for c in candidates {
        if used[c] || g2.degree(c) != g1.degree(v) {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&u| g1.is_edge(u, v) == g2.is_edge(map[u], c));
        if !consistent {
            continue;
        }
        map[v] = c;
        used[c] = true;
        if assign(g1, g2, order, depth + 1, map, used) {
            return true;
        }
        map[v] = usize::MAX;
        used[c] = false;
    }
    false
}

pub fn is_isomorphic(g1: &Graph, g2: &Graph) -> bool {
    find_isomorphism(g1, g2).is_some()
}
