#![allow(dead_code)]

use crawl_core::graph::Graph;
use proptest::prelude::*;
use rand::Rng;

/// Erdős–Rényi graph with every isolated node patched by one random edge.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    for v in 0..n {
        if !edges.iter().any(|&(a, b)| a == v || b == v) {
            let u = (v + rng.gen_range(1..n)) % n;
            edges.push((u.min(v), u.max(v)));
        }
    }
    Graph::new(n, &edges).expect("patched graph has no isolated nodes")
}

/// Proptest strategy for connected-or-not graphs without isolated nodes.
pub fn arb_graph(max_nodes: usize) -> impl Strategy<Value = Graph> {
    (2..=max_nodes, 0.1f64..0.9, any::<u64>()).prop_map(|(n, p, seed)| {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        random_graph(&mut rng, n, p)
    })
}

use crawl_core::expressiveness::walklet_subgraph_oracle;
use crawl_core::graph::Features;
use crawl_core::walker::{sample_walks, WalkSet, WalkStrategy};
use crawl_core::walkfeat::{build_features, Encodings, WalkFeatureTensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;

/// Tally of the two window properties linking feature rows to induced
/// subgraph isomorphisms.
#[derive(Debug, Default)]
pub struct WindowTally {
    /// Window pairs whose last `s` structural rows agree.
    pub equal_row_pairs: usize,
    /// ... of which the position map is an isomorphism of the `s + 1` nodes.
    pub equal_rows_isomorphic: usize,
    /// Window pairs whose `2s`-node position map is an isomorphism.
    pub isomorphic_pairs: usize,
    /// ... found by search over unrelated walks rather than by relabeling.
    pub isomorphic_found_by_search: usize,
    /// ... of which the last `s` structural rows agree.
    pub isomorphic_rows_equal: usize,
}

fn tensor(g: &Graph, ws: &WalkSet, s: usize) -> WalkFeatureTensor {
    let f = Features::new(1, vec![1.0; g.n_nodes()]).unwrap();
    build_features(g, ws, &f, None, s, Encodings::BOTH).unwrap()
}

fn rows_equal(x: &WalkFeatureTensor, w: usize, y: &WalkFeatureTensor, v: usize, i: usize, s: usize) -> bool {
    (0..s).all(|j| x.structural(w, i - j) == y.structural(v, i - j))
}

/// Draws random graphs with at most 10 nodes and random walks on them until
/// `target` pairs have been checked for each property.
pub fn window_properties(seed: u64, target: usize) -> WindowTally {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut tally = WindowTally::default();
    let mut round = 0u64;
    while tally.equal_row_pairs < target || tally.isomorphic_pairs < target {
        round += 1;
        let s = *[2usize, 4].choose(&mut rng).unwrap();
        let strategy = *[WalkStrategy::Uniform, WalkStrategy::NonBacktracking].choose(&mut rng).unwrap();
        let ell = 4 * s + 4;
        let (n, p) = (rng.gen_range(3..=10), rng.gen_range(0.2..0.8));
        let g = random_graph(&mut rng, n, p);
        let h = if rng.gen_bool(0.3) {
            g.clone()
        } else {
            let (n, p) = (rng.gen_range(3..=10), rng.gen_range(0.2..0.8));
            random_graph(&mut rng, n, p)
        };
        let wg = sample_walks(&g, strategy, 1.0, ell, seed ^ round).unwrap();
        let wh = sample_walks(&h, strategy, 1.0, ell, seed ^ round.rotate_left(32)).unwrap();
        let (xg, xh) = (tensor(&g, &wg, s), tensor(&h, &wh, s));

        for _ in 0..20 {
            let (a, b) = (rng.gen_range(0..wg.num_walks()), rng.gen_range(0..wh.num_walks()));
            let i = rng.gen_range(2 * s - 1..=ell);

            // property 1: equal rows i-s+1..=i force an isomorphism on w[i-s..=i]
            if rows_equal(&xg, a, &xh, b, i, s) && tally.equal_row_pairs < target {
                tally.equal_row_pairs += 1;
                let v = walklet_subgraph_oracle(&g, &wg.walk(a)[i - s..=i], &h, &wh.walk(b)[i - s..=i]).unwrap();
                tally.equal_rows_isomorphic += v.holds() as usize;
            }

            // property 2: an isomorphism on w[i-2s+1..=i] forces equal rows
            let (span_g, span_h) = (&wg.walk(a)[i + 1 - 2 * s..=i], &wh.walk(b)[i + 1 - 2 * s..=i]);
            if walklet_subgraph_oracle(&g, span_g, &h, span_h).unwrap().holds() && tally.isomorphic_pairs < target {
                tally.isomorphic_pairs += 1;
                tally.isomorphic_found_by_search += 1;
                tally.isomorphic_rows_equal += rows_equal(&xg, a, &xh, b, i, s) as usize;
            }
        }

        // constructed isomorphic windows: the same walk pushed through a relabeling
        if tally.isomorphic_pairs < target {
            let mut perm: Vec<usize> = (0..g.n_nodes()).collect();
            perm.shuffle(&mut rng);
            let pg = g.relabel(&perm).unwrap();
            let rows: Vec<Vec<usize>> = wg.iter().map(|w| w.iter().map(|&v| perm[v]).collect()).collect();
            let pw = WalkSet::from_rows(&rows, strategy, 0).unwrap();
            let xp = tensor(&pg, &pw, s);
            let a = rng.gen_range(0..wg.num_walks());
            let i = rng.gen_range(2 * s - 1..=ell);
            let v = walklet_subgraph_oracle(&g, &wg.walk(a)[i + 1 - 2 * s..=i], &pg, &pw.walk(a)[i + 1 - 2 * s..=i]).unwrap();
            assert!(v.holds(), "relabeling must give an isomorphic window");
            tally.isomorphic_pairs += 1;
            tally.isomorphic_rows_equal += rows_equal(&xg, a, &xp, a, i, s) as usize;
        }
    }
    tally
}
