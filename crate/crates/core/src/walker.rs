//! Uniform and non-backtracking random walks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Stream id reserved for drawing start nodes; walk `i` uses stream `i`.
const START_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkStrategy {
    /// Next node uniform over all neighbors.
    Uniform,
    /// Next node uniform over all neighbors except the previous node,
    /// unless the current node has degree one.
    #[serde(alias = "nb")]
    NonBacktracking,
}

impl fmt::Display for WalkStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WalkStrategy::Uniform => "uniform",
            WalkStrategy::NonBacktracking => "nb",
        })
    }
}

impl FromStr for WalkStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "un" => Ok(WalkStrategy::Uniform),
            "nb" | "non_backtracking" | "non-backtracking" => Ok(WalkStrategy::NonBacktracking),
            other => Err(Error::invalid(format!("unknown walk strategy {other:?}"))),
        }
    }
}

/// `m` walks of `ell` steps each, stored row-major as `m × (ell + 1)` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkSet {
    nodes: Vec<usize>,
    ell: usize,
    strategy: WalkStrategy,
    seed: u64,
}

impl WalkSet {
    /// Wraps explicit walks. Rows must all have `ell + 1` nodes.
    pub fn from_rows(rows: &[Vec<usize>], strategy: WalkStrategy, seed: u64) -> Result<Self> {
        let len = rows.first().map_or(1, Vec::len);
        if len == 0 || rows.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("walk rows must be non-empty and of equal length"));
        }
        Ok(Self {
            nodes: rows.concat(),
            ell: len - 1,
            strategy,
            seed,
        })
    }

    pub fn num_walks(&self) -> usize {
        self.nodes.len() / (self.ell + 1)
    }

    /// Steps per walk; each walk has `ell + 1` nodes.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn strategy(&self) -> WalkStrategy {
        self.strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn walk(&self, i: usize) -> &[usize] {
        let r = self.ell + 1;
        &self.nodes[i * r..(i + 1) * r]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.nodes.chunks(self.ell + 1)
    }

    /// All nodes, row-major.
    pub fn as_flat(&self) -> &[usize] {
        &self.nodes
    }

    /// Returns a copy with every node id increased by `offset`.
    pub fn shifted(&self, offset: usize) -> WalkSet {
        WalkSet {
            nodes: self.nodes.iter().map(|v| v + offset).collect(),
            ..self.clone()
        }
    }

    /// Concatenates walk sets of equal length (e.g. of a batch of graphs
    /// whose node ids were already shifted apart).
    pub fn concat(parts: &[WalkSet]) -> Result<WalkSet> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("cannot concatenate zero walk sets"))?;
        if parts.iter().any(|p| p.ell != first.ell) {
            return Err(Error::invalid("walk sets have different lengths"));
        }
        Ok(WalkSet {
            nodes: parts.iter().flat_map(|p| p.nodes.iter().copied()).collect(),
            ell: first.ell,
            strategy: first.strategy,
            seed: first.seed,
        })
    }

    /// The walklet of `s + 1` nodes centered at `center_pos` of walk
    /// `walk_idx`.
    pub fn walklet(&self, walk_idx: usize, center_pos: usize, s: usize) -> Result<&[usize]> {
        if !s.is_multiple_of(2) {
            return Err(Error::invalid(format!("walklet size s = {s} must be even")));
        }
        if walk_idx >= self.num_walks() {
            return Err(Error::invalid(format!("walk index {walk_idx} out of range")));
        }
        let half = s / 2;
        if center_pos < half || center_pos + half > self.ell {
            return Err(Error::invalid(format!(
                "center {center_pos} outside [{half}, {}] for s = {s}",
                self.ell.saturating_sub(half)
            )));
        }
        Ok(&self.walk(walk_idx)[center_pos - half..=center_pos + half])
    }
}

/// Start nodes for one sampling pass.
///
/// `p_star = 1` starts exactly one walk at every node. Smaller values draw
/// `round(p_star · |V|)` nodes (half rounds up, at least one) uniformly with
/// replacement.
pub fn start_nodes(g: &Graph, p_star: f64, seed: u64) -> Result<Vec<usize>> {
    if !(p_star > 0.0 && p_star <= 1.0) {
        return Err(Error::invalid(format!("p* = {p_star} outside (0, 1]")));
    }
    let n = g.n_nodes();
    if p_star == 1.0 {
        return Ok((0..n).collect());
    }
    let m = ((p_star * n as f64 + 0.5).floor() as usize).max(1);
    let mut rng = rng::stream(seed, START_STREAM);
    Ok((0..m).map(|_| rng.gen_range(0..n)).collect())
}

/// Samples walks from the start nodes chosen by [`start_nodes`].
pub fn sample_walks(
    g: &Graph,
    strategy: WalkStrategy,
    p_star: f64,
    ell: usize,
    seed: u64,
) -> Result<WalkSet> {
    let starts = start_nodes(g, p_star, seed)?;
    sample_walks_from(g, strategy, &starts, ell, seed)
}

/// Samples one walk of `ell` steps from each given start node. Walk `i`
/// draws from stream `(seed, i)`, so results do not depend on fill order.
pub fn sample_walks_from(
    g: &Graph,
    strategy: WalkStrategy,
    starts: &[usize],
    ell: usize,
    seed: u64,
) -> Result<WalkSet> {
    if starts.is_empty() {
        return Err(Error::invalid("need at least one walk"));
    }
    if ell == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    if let Some(&bad) = starts.iter().find(|&&v| v >= g.n_nodes()) {
        return Err(Error::invalid(format!("start node {bad} out of range")));
    }
    let row = ell + 1;
    let mut nodes = vec![0usize; starts.len() * row];
    for (i, (walk, &start)) in nodes.chunks_mut(row).zip(starts).enumerate() {
        let mut rng = rng::stream(seed, i as u64);
        fill_walk(g, strategy, start, walk, &mut rng);
    }
    Ok(WalkSet {
        nodes,
        ell,
        strategy,
        seed,
    })
}

fn fill_walk(g: &Graph, strategy: WalkStrategy, start: usize, walk: &mut [usize], rng: &mut impl Rng) {
    walk[0] = start;
    for i in 1..walk.len() {
        let cur = walk[i - 1];
        let nbrs = g.neighbors(cur);
        let next = match strategy {
            WalkStrategy::NonBacktracking if i >= 2 && nbrs.len() > 1 => {
                let prev = walk[i - 2];
                // pick among deg - 1 slots, skipping over prev
                let mut k = rng.gen_range(0..nbrs.len() - 1);
                let prev_slot = nbrs.binary_search(&prev).expect("walk follows edges");
                if k >= prev_slot {
                    k += 1;
                }
                nbrs[k]
            }
            _ => nbrs[rng.gen_range(0..nbrs.len())],
        };
        walk[i] = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{make_cycle, make_path};

    #[test]
    fn path_of_two_forces_backtracking() {
        let g = make_path(2).unwrap();
        for seed in 0..20 {
            let ws = sample_walks_from(&g, WalkStrategy::NonBacktracking, &[0], 4, seed).unwrap();
            assert_eq!(ws.walk(0), &[0, 1, 0, 1, 0]);
        }
    }

    #[test]
    fn star_center_returns_after_two_steps() {
        let g = Graph::new(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        for seed in 0..50 {
            let ws = sample_walks_from(&g, WalkStrategy::Uniform, &[0], 2, seed).unwrap();
            assert_eq!(ws.walk(0)[2], 0);
        }
    }

    #[test]
    fn start_node_policy() {
        let c8 = make_cycle(8).unwrap();
        assert_eq!(start_nodes(&c8, 1.0, 3).unwrap(), (0..8).collect::<Vec<_>>());
        let c10 = make_cycle(10).unwrap();
        assert_eq!(start_nodes(&c10, 0.2, 3).unwrap().len(), 2);
        let c5 = make_cycle(5).unwrap();
        assert_eq!(start_nodes(&c5, 0.5, 3).unwrap().len(), 3);
        assert!(start_nodes(&c5, 0.0, 3).is_err());
        assert!(start_nodes(&c5, 1.5, 3).is_err());
    }

    #[test]
    fn walklets() {
        let ws = WalkSet::from_rows(&[vec![0, 1, 0, 1, 0]], WalkStrategy::Uniform, 0).unwrap();
        assert_eq!(ws.walklet(0, 3, 0).unwrap(), &[1]);
        assert_eq!(ws.walklet(0, 2, 2).unwrap(), &[1, 0, 1]);
        assert!(ws.walklet(0, 0, 2).is_err());
        assert!(ws.walklet(0, 4, 2).is_err());
        assert!(ws.walklet(0, 2, 3).is_err());
        assert!(ws.walklet(1, 2, 2).is_err());
    }

    #[test]
    fn nb_walklet_on_c8_has_distinct_nodes() {
        let g = make_cycle(8).unwrap();
        let ws = sample_walks(&g, WalkStrategy::NonBacktracking, 1.0, 12, 11).unwrap();
        for w in 0..ws.num_walks() {
            for c in 2..=10 {
                let mut nodes = ws.walklet(w, c, 4).unwrap().to_vec();
                nodes.sort_unstable();
                nodes.dedup();
                assert_eq!(nodes.len(), 5);
            }
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("nb".parse::<WalkStrategy>().unwrap(), WalkStrategy::NonBacktracking);
        assert_eq!("uniform".parse::<WalkStrategy>().unwrap(), WalkStrategy::Uniform);
        assert!("node2vec".parse::<WalkStrategy>().is_err());
    }
}
