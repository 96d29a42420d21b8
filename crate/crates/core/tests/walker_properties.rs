mod common;

use common::arb_graph;
use crawl_core::graph::{make_cycle, make_csl, Graph};
use crawl_core::walker::{sample_walks, sample_walks_from, WalkStrategy};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn strategy() -> impl Strategy<Value = WalkStrategy> {
    prop_oneof![Just(WalkStrategy::Uniform), Just(WalkStrategy::NonBacktracking)]
}

proptest! {
    #[test]
    fn walks_follow_edges_and_nb_rule(
        g in arb_graph(12),
        strat in strategy(),
        ell in 1usize..30,
        p_star in prop_oneof![Just(1.0f64), 0.05f64..1.0],
        seed in any::<u64>(),
    ) {
        let ws = sample_walks(&g, strat, p_star, ell, seed).unwrap();
        prop_assert_eq!(ws.ell(), ell);
        for w in ws.iter() {
            prop_assert_eq!(w.len(), ell + 1);
            for pair in w.windows(2) {
                prop_assert!(g.is_edge(pair[0], pair[1]));
            }
            if strat == WalkStrategy::NonBacktracking {
                for i in 1..ell {
                    prop_assert!(w[i + 1] != w[i - 1] || g.degree(w[i]) == 1);
                }
            }
        }
    }

    #[test]
    fn equal_arguments_give_identical_walks(g in arb_graph(10), strat in strategy(), seed in any::<u64>()) {
        let a = sample_walks(&g, strat, 0.7, 12, seed).unwrap();
        let b = sample_walks(&g, strat, 0.7, 12, seed).unwrap();
        prop_assert_eq!(a.as_flat(), b.as_flat());
    }
}

/// Pearson statistic of observed counts against equal expected counts.
fn chi_square_p(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

fn lopsided_graph() -> Graph {
    // node 0 has neighbors 1..=5; a few extra edges so nb walks have choices
    Graph::new(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2), (3, 6), (4, 6), (5, 6)]).unwrap()
}

#[test]
fn uniform_first_step_is_uniform_over_neighbors() {
    let g = lopsided_graph();
    let starts = vec![0; 100_000];
    let ws = sample_walks_from(&g, WalkStrategy::Uniform, &starts, 1, 11).unwrap();
    let mut counts = vec![0usize; 5];
    for w in ws.iter() {
        counts[w[1] - 1] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 1e-3, "p = {p}, counts {counts:?}");
}

#[test]
fn nb_transition_is_uniform_over_neighbors_minus_previous() {
    let g = lopsided_graph();
    // walks from 6 reach 0 via 3, 4 or 5; the step after 0 excludes that node
    let starts = vec![6; 300_000];
    let ws = sample_walks_from(&g, WalkStrategy::NonBacktracking, &starts, 3, 12).unwrap();
    for prev in [3usize, 4, 5] {
        let mut counts = std::collections::BTreeMap::new();
        for w in ws.iter().filter(|w| w[1] == prev && w[2] == 0) {
            *counts.entry(w[3]).or_insert(0usize) += 1;
        }
        assert!(!counts.contains_key(&prev));
        assert_eq!(counts.len(), 4);
        let counts: Vec<usize> = counts.into_values().collect();
        assert!(counts.iter().sum::<usize>() > 50_000);
        let p = chi_square_p(&counts);
        assert!(p > 1e-3, "prev {prev}: p = {p}, counts {counts:?}");
    }
    // uniform walks from the same node may return
    let ws = sample_walks_from(&g, WalkStrategy::Uniform, &starts[..100_000], 2, 13).unwrap();
    let mut counts = [0usize; 7];
    for w in ws.iter().filter(|w| w[1] == 3) {
        counts[w[2]] += 1;
    }
    let p = chi_square_p(&[counts[0], counts[6]]);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn nb_walks_on_a_square_go_round_either_way() {
    let g = make_cycle(4).unwrap();
    let n = 10_000;
    let starts = vec![0; n];
    let ws = sample_walks_from(&g, WalkStrategy::NonBacktracking, &starts, 8, 3).unwrap();
    let mut clockwise = 0usize;
    for w in ws.iter() {
        let forward = w.windows(2).all(|p| p[1] == (p[0] + 1) % 4);
        let backward = w.windows(2).all(|p| p[0] == (p[1] + 1) % 4);
        assert!(forward ^ backward, "{w:?}");
        clockwise += forward as usize;
    }
    // within three standard deviations of n / 2
    let sigma = (n as f64 * 0.25).sqrt();
    assert!((clockwise as f64 - n as f64 / 2.0).abs() < 3.0 * sigma, "{clockwise}");
}

#[test]
fn walks_are_independent_of_the_rest_of_the_batch() {
    let g = make_csl(41, 5).unwrap();
    let all: Vec<usize> = (0..41).collect();
    let full = sample_walks_from(&g, WalkStrategy::NonBacktracking, &all, 20, 99).unwrap();
    let prefix = sample_walks_from(&g, WalkStrategy::NonBacktracking, &all[..10], 20, 99).unwrap();
    for i in 0..10 {
        assert_eq!(full.walk(i), prefix.walk(i));
    }
}
