use rand::seq::SliceRandom;

use super::{Dataset, Graph, Label, Task};
use crate::error::{Error, Result};
use crate::rng;

/// Node count of the canonical skip-link benchmark graphs.
pub const CSL_NODES: usize = 41;

/// Skip distances of the ten benchmark isomorphism classes, in class order.
pub const CSL_SKIPS: [usize; 10] = [2, 3, 4, 5, 6, 9, 11, 12, 13, 16];

const CSL_PER_CLASS: usize = 15;
const CSL_FOLDS: usize = 5;
const CSL_DEFAULT_SEED: u64 = 0x00c5_1d47;

/// The cycle `C_n`.
pub fn make_cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::invalid(format!("cycle needs at least 3 nodes, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::new(n, &edges)
}

/// The path with `n` nodes.
pub fn make_path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("path needs at least 2 nodes, got {n}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Graph::new(n, &edges)
}

/// Places `b` next to `a`; the nodes of `b` are shifted by `a.n_nodes()`.
///
/// Features are concatenated when both graphs carry them with equal widths
/// and dropped otherwise. The label of `a` is kept.
pub fn disjoint_union(a: &Graph, b: &Graph) -> Graph {
    let off = a.n_nodes();
    let edges: Vec<_> = a
        .edges()
        .iter()
        .copied()
        .chain(b.edges().iter().map(|&(u, v)| (u + off, v + off)))
        .collect();
    let mut g = Graph::new(off + b.n_nodes(), &edges).expect("union of valid graphs is valid");
    if let (Some(fa), Some(fb)) = (a.node_features(), b.node_features()) {
        if fa.dim() == fb.dim() {
            let data = fa.as_slice().iter().chain(fb.as_slice()).copied().collect();
            g = g
                .with_node_features(super::Features::new(fa.dim(), data).unwrap())
                .unwrap();
        }
    }
    if let (Some(fa), Some(fb)) = (a.edge_features(), b.edge_features()) {
        if fa.dim() == fb.dim() {
            let data = fa.as_slice().iter().chain(fb.as_slice()).copied().collect();
            g = g
                .with_edge_features(super::Features::new(fa.dim(), data).unwrap())
                .unwrap();
        }
    }
    if let Some(l) = a.label() {
        g = g.with_label(l);
    }
    g
}

/// Three internally disjoint paths between `x = 0` and `y = 1`.
///
/// With `balanced` all three paths have length `n`; otherwise the lengths are
/// `n - 1`, `n` and `n + 1`. Both variants have `3n - 1` nodes.
pub fn make_three_paths(n: usize, balanced: bool) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("three-path gadget needs n >= 2, got {n}")));
    }
    let lengths = if balanced { [n, n, n] } else { [n - 1, n, n + 1] };
    let (x, y) = (0, 1);
    let mut next = 2;
    let mut edges = Vec::new();
    for len in lengths {
        let mut prev = x;
        for _ in 1..len {
            edges.push((prev, next));
            prev = next;
            next += 1;
        }
        edges.push((prev, y));
    }
    Graph::new(next, &edges)
}

/// The cyclic skip-link graph: the cycle `0..n` plus chords `{i, i + skip}`.
pub fn make_csl(n_nodes: usize, skip: usize) -> Result<Graph> {
    if n_nodes < 5 {
        return Err(Error::invalid(format!("skip-link graph needs >= 5 nodes, got {n_nodes}")));
    }
    if skip < 2 || 2 * skip >= n_nodes {
        return Err(Error::invalid(format!(
            "skip {skip} outside 2 <= skip < n/2 for n = {n_nodes}"
        )));
    }
    let edges: Vec<_> = (0..n_nodes)
        .flat_map(|i| [(i, (i + 1) % n_nodes), (i, (i + skip) % n_nodes)])
        .collect();
    let g = Graph::new(n_nodes, &edges)?;
    debug_assert!(g.degrees().iter().all(|&d| d == 4));
    Ok(g)
}

/// Applies a uniformly random node permutation drawn from `seed`.
pub fn random_relabel(g: &Graph, seed: u64) -> Graph {
    let mut perm: Vec<usize> = (0..g.n_nodes()).collect();
    perm.shuffle(&mut rng::stream(seed, 0));
    g.relabel(&perm).expect("shuffle is a permutation")
}

/// The 150-graph skip-link classification benchmark with the default seed.
pub fn make_csl_dataset() -> Dataset {
    make_csl_dataset_with_seed(CSL_DEFAULT_SEED)
}

/// 15 random relabelings of `CSL(41, skip)` for each skip in [`CSL_SKIPS`],
/// labeled by class index, with 5 stratified folds of 3 graphs per class.
pub fn make_csl_dataset_with_seed(seed: u64) -> Dataset {
    let mut graphs = Vec::with_capacity(CSL_SKIPS.len() * CSL_PER_CLASS);
    let mut folds = Vec::with_capacity(graphs.capacity());
    for (class, &skip) in CSL_SKIPS.iter().enumerate() {
        let base = make_csl(CSL_NODES, skip).expect("benchmark skips are valid");
        for copy in 0..CSL_PER_CLASS {
            let s = rng::derive_indexed(seed, &[class as u64, copy as u64]);
            graphs.push(random_relabel(&base, s).with_label(Label::Class(class)));
            folds.push(copy % CSL_FOLDS);
        }
    }
    Dataset::new(
        graphs,
        folds,
        Task::Classification {
            num_classes: CSL_SKIPS.len(),
        },
    )
    .expect("benchmark dataset is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles() {
        let c3 = make_cycle(3).unwrap();
        assert_eq!(c3.n_edges(), 3);
        assert!(make_cycle(2).is_err());
        let c8 = make_cycle(8).unwrap();
        assert!(c8.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn unions() {
        let c4 = make_cycle(4).unwrap();
        let u = disjoint_union(&c4, &c4);
        assert_eq!((u.n_nodes(), u.n_edges(), u.components()), (8, 8, 2));
        assert!(u.degrees().iter().all(|&d| d == 2));

        let c3 = make_cycle(3).unwrap();
        let u = disjoint_union(&c3, &c3);
        let c6 = make_cycle(6).unwrap();
        assert_eq!(u.degrees(), c6.degrees());
        assert_ne!(u.components(), c6.components());
    }

    #[test]
    fn three_paths() {
        let g = make_three_paths(3, true).unwrap();
        assert_eq!(g.n_nodes(), 8);
        assert_eq!((g.degree(0), g.degree(1)), (3, 3));
        assert!((2..8).all(|v| g.degree(v) == 2));
        assert_eq!(make_three_paths(2, true).unwrap().n_nodes(), 5);
        assert!(make_three_paths(1, true).is_err());
        // edges: balanced has 3n, unbalanced (n-1) + n + (n+1) = 3n
        assert_eq!(g.n_edges(), 9);
        assert_eq!(make_three_paths(3, false).unwrap().n_edges(), 9);
    }

    #[test]
    fn unbalanced_path_lengths() {
        let g = make_three_paths(3, false).unwrap();
        assert_eq!(g.n_nodes(), 8);
        // walk each branch from x until y
        let mut lengths: Vec<usize> = g
            .neighbors(0)
            .iter()
            .map(|&first| {
                let (mut prev, mut cur, mut len) = (0, first, 1);
                while cur != 1 {
                    let next = *g.neighbors(cur).iter().find(|&&u| u != prev).unwrap();
                    prev = cur;
                    cur = next;
                    len += 1;
                }
                len
            })
            .collect();
        lengths.sort_unstable();
        assert_eq!(lengths, vec![2, 3, 4]);
    }

    #[test]
    fn skip_link_graphs() {
        for skip in [2, 3] {
            let g = make_csl(11, skip).unwrap();
            assert_eq!(g.n_edges(), 22);
            assert!(g.degrees().iter().all(|&d| d == 4));
        }
        assert!(make_csl(11, 1).is_err());
        assert!(make_csl(10, 5).is_err());
        assert!(make_csl(4, 2).is_err());
    }

    #[test]
    fn csl_dataset_layout() {
        let ds = make_csl_dataset();
        assert_eq!(ds.len(), 150);
        for fold in 0..5 {
            let members = ds.fold_members(fold);
            assert_eq!(members.len(), 30);
            for class in 0..10 {
                let c = members
                    .iter()
                    .filter(|&&i| ds.graphs()[i].label() == Some(Label::Class(class)))
                    .count();
                assert_eq!(c, 3);
            }
        }
    }
}
