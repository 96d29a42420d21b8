mod common;

use crawl_core::expressiveness::find_isomorphism;
use crawl_core::graph::{
    disjoint_union, make_csl, make_cycle, make_path, make_three_paths, random_relabel, Graph, CSL_NODES, CSL_SKIPS,
};
use crawl_core::Error;
use proptest::prelude::*;

fn valid_edge_list(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = std::collections::HashSet::new();
    let mut touched = vec![false; n];
    for &(u, v) in edges {
        if u == v || !seen.insert((u.min(v), u.max(v))) {
            return false;
        }
        touched[u] = true;
        touched[v] = true;
    }
    touched.iter().all(|&t| t)
}

proptest! {
    #[test]
    fn skip_link_graphs_are_four_regular(n in 5usize..80, skip_frac in 0.0f64..1.0) {
        let max_skip = (n - 1) / 2;
        prop_assume!(max_skip >= 2);
        let skip = 2 + ((max_skip - 2) as f64 * skip_frac) as usize;
        let g = make_csl(n, skip).unwrap();
        prop_assert!(g.degrees().iter().all(|&d| d == 4));
        prop_assert_eq!(g.n_edges(), 2 * n);
    }

    #[test]
    fn validation_rejects_exactly_loops_duplicates_and_isolated(
        n in 1usize..8,
        raw in prop::collection::vec((0usize..8, 0usize..8), 0..16),
    ) {
        let edges: Vec<_> = raw.into_iter().map(|(u, v)| (u % n, v % n)).collect();
        let built = Graph::new(n, &edges);
        prop_assert_eq!(built.is_ok(), valid_edge_list(n, &edges));
        if let Err(e) = built {
            prop_assert!(matches!(e, Error::Validation(_)));
        }
    }

    #[test]
    fn relabeling_preserves_isomorphism_class(pick in 0usize..6, size in 3usize..7, seed in any::<u64>()) {
        let g = match pick {
            0 => make_cycle(size + 3).unwrap(),
            1 => make_path(size + 2).unwrap(),
            2 => make_three_paths(size.min(4), true).unwrap(),
            3 => make_three_paths(size.min(4), false).unwrap(),
            4 => make_csl(11 + size % 2, 2 + size % 3).unwrap(),
            _ => disjoint_union(&make_cycle(size).unwrap(), &make_cycle(size).unwrap()),
        };
        prop_assert!(g.n_nodes() <= 12);
        let h = random_relabel(&g, seed);
        let f = find_isomorphism(&g, &h).expect("relabeled graph must be isomorphic");
        for &(u, v) in g.edges() {
            prop_assert!(h.is_edge(f[u], f[v]));
        }
    }
}

#[test]
fn three_path_order_and_size() {
    for n in 2..=20 {
        for balanced in [true, false] {
            let g = make_three_paths(n, balanced).unwrap();
            assert_eq!(g.n_nodes(), 3 * n - 1);
            assert_eq!(g.n_edges(), 3 * n);
            let hubs = g.degrees().iter().filter(|&&d| d == 3).count();
            assert_eq!(hubs, 2);
        }
    }
    assert!(make_three_paths(1, true).is_err());
}

#[test]
fn csl_edge_count_by_brute_force() {
    for &skip in &CSL_SKIPS {
        let g = make_csl(CSL_NODES, skip).unwrap();
        let mut pairs = std::collections::BTreeSet::new();
        for i in 0..CSL_NODES {
            for j in [(i + 1) % CSL_NODES, (i + skip) % CSL_NODES] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
        assert_eq!(pairs.len(), 82);
        assert_eq!(g.n_edges(), pairs.len());
        assert!(pairs.iter().all(|&(u, v)| g.is_edge(u, v)));
    }
}

#[test]
fn small_skip_link_figures() {
    for skip in [2, 3] {
        let g = make_csl(11, skip).unwrap();
        assert_eq!(g.n_edges(), 22);
        assert!(g.degrees().iter().all(|&d| d == 4));
    }
    assert!(make_csl(11, 1).is_err());
    assert!(make_csl(11, 6).is_err());
}

#[test]
fn union_of_triangles_vs_hexagon() {
    let c3 = make_cycle(3).unwrap();
    let u = disjoint_union(&c3, &c3);
    let c6 = make_cycle(6).unwrap();
    assert_eq!(u.degrees(), c6.degrees());
    assert_eq!(u.components(), 2);
    assert_eq!(c6.components(), 1);
    assert!(find_isomorphism(&u, &c6).is_none());
}
