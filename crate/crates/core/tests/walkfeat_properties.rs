mod common;

use common::{arb_graph, window_properties};
use crawl_core::graph::{make_cycle, make_path, Features, Graph};
use crawl_core::walker::{sample_walks, WalkSet, WalkStrategy};
use crawl_core::walkfeat::{build_features, feature_width, Encodings};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn random_features(rows: usize, dim: usize, seed: u64) -> Features {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Features::new(dim, (0..rows * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #[test]
    fn width_matches_formula_for_every_toggle(d in 1usize..40, de in 0usize..12, half in 0usize..10) {
        let s = 2 * half;
        let adj = s.saturating_sub(1);
        prop_assert_eq!(feature_width(d, de, s, Encodings::BOTH), d + de + s + adj);
        prop_assert_eq!(feature_width(d, de, s, Encodings::IDENTITY), d + de + s);
        prop_assert_eq!(feature_width(d, de, s, Encodings::ADJACENCY), d + de + adj);
        prop_assert_eq!(feature_width(d, de, s, Encodings::NONE), d + de);
    }

    #[test]
    fn built_tensors_have_formula_width(
        g in arb_graph(8),
        d in 1usize..5,
        de in 0usize..3,
        half in 0usize..4,
        enc in 0usize..4,
        seed in any::<u64>(),
    ) {
        let s = 2 * half;
        let enc = Encodings::ALL[enc];
        let ws = sample_walks(&g, WalkStrategy::Uniform, 1.0, 6, seed).unwrap();
        let f = random_features(g.n_nodes(), d, seed);
        let e = (de > 0).then(|| random_features(g.n_edges(), de, seed ^ 1));
        let x = build_features(&g, &ws, &f, e.as_ref(), s, enc).unwrap();
        prop_assert_eq!(x.shape(), [g.n_nodes(), 7, feature_width(d, de, s, enc)]);
        for w in 0..ws.num_walks() {
            prop_assert!(x.row(w, 0)[d..d + de].iter().all(|&v| v == 0.0));
            for i in 0..7 {
                prop_assert!(x.structural(w, i).iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
    }

    #[test]
    fn relabeling_leaves_features_unchanged(g in arb_graph(9), half in 1usize..4, seed in any::<u64>()) {
        let s = 2 * half;
        let mut perm: Vec<usize> = (0..g.n_nodes()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (n, m) = (g.n_nodes(), g.n_edges());
        let g = g.with_node_features(random_features(n, 2, seed)).unwrap();
        let g = g.with_edge_features(random_features(m, 3, seed ^ 7)).unwrap();
        let h = g.relabel(&perm).unwrap();
        let ws = sample_walks(&g, WalkStrategy::NonBacktracking, 1.0, 10, seed).unwrap();
        let rows: Vec<Vec<usize>> = ws.iter().map(|w| w.iter().map(|&v| perm[v]).collect()).collect();
        let wh = WalkSet::from_rows(&rows, ws.strategy(), ws.seed()).unwrap();
        let x = build_features(&g, &ws, g.node_features().unwrap(), g.edge_features(), s, Encodings::BOTH).unwrap();
        let y = build_features(&h, &wh, h.node_features().unwrap(), h.edge_features(), s, Encodings::BOTH).unwrap();
        prop_assert_eq!(x.as_slice(), y.as_slice());
    }
}

fn structural_blocks(g: &Graph, strategy: WalkStrategy, s: usize, ell: usize, seed: u64) -> Vec<Vec<f64>> {
    let ws = sample_walks(g, strategy, 1.0, ell, seed).unwrap();
    let f = Features::new(1, vec![1.0; g.n_nodes()]).unwrap();
    let x = build_features(g, &ws, &f, None, s, Encodings::BOTH).unwrap();
    (0..ws.num_walks())
        .flat_map(|w| (0..=ell).map(move |i| (w, i)))
        .map(|(w, i)| x.structural(w, i).to_vec())
        .collect()
}

#[test]
fn nb_walks_on_paths_see_structure_only_near_a_bounce() {
    // an nb walk on a path reverses only at an endpoint p and then retraces
    // itself, so v_i equals the node 2(i - p) back and touches its two
    // walk neighbors; nothing else in the window is equal or adjacent
    for (n, s) in [(6usize, 2usize), (7, 4), (9, 6), (12, 4)] {
        let g = make_path(n).unwrap();
        let ell = 40;
        let ws = sample_walks(&g, WalkStrategy::NonBacktracking, 1.0, ell, n as u64).unwrap();
        let f = Features::new(1, vec![1.0; n]).unwrap();
        let x = build_features(&g, &ws, &f, None, s, Encodings::BOTH).unwrap();
        for (w, walk) in ws.iter().enumerate() {
            for i in 0..=ell {
                let near_bounce = (1..i).filter(|&p| g.degree(walk[p]) == 1).any(|p| {
                    let k = 2 * (i - p);
                    [k - 1, k, k + 1].iter().any(|&dist| dist >= 2 && dist <= s && dist <= i)
                });
                let any_bit = x.structural(w, i).contains(&1.0);
                assert_eq!(any_bit, near_bounce, "n {n} s {s} walk {walk:?} row {i}");
            }
        }
    }
}

#[test]
fn nb_walks_on_an_eight_cycle_look_alike_everywhere() {
    let g = make_cycle(8).unwrap();
    let blocks = structural_blocks(&g, WalkStrategy::NonBacktracking, 4, 20, 3);
    // after the first s rows every window is a 5-node path
    let ell = 20;
    let interior: Vec<&Vec<f64>> = blocks
        .chunks(ell + 1)
        .flat_map(|walk| walk[4..].iter())
        .collect();
    assert!(interior.windows(2).all(|p| p[0] == p[1]));
    assert!(interior[0].iter().all(|&b| b == 0.0));
}

#[test]
fn window_properties_hold_on_random_graphs() {
    let t = window_properties(2024, 1000);
    assert_eq!(t.equal_rows_isomorphic, t.equal_row_pairs);
    assert_eq!(t.isomorphic_rows_equal, t.isomorphic_pairs);
    assert!(t.isomorphic_found_by_search > 0);
    assert_eq!(t.equal_row_pairs, 1000);
}
