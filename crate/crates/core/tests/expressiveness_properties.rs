mod common;

use std::collections::BTreeMap;

use crawl_core::expressiveness::{
    exact_feature_distribution, find_isomorphism, nb_indistinguishability_check, sampled_feature_distribution,
    tv_distance, FeatureDistribution, Masses, DEFAULT_BUDGET,
};
use crawl_core::graph::{disjoint_union, make_csl, make_csl_dataset, make_cycle, Graph, Label};
use crawl_core::walker::WalkStrategy;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRATEGIES: [WalkStrategy; 2] = [WalkStrategy::Uniform, WalkStrategy::NonBacktracking];

/// Walk probabilities by plain recursion over every walk, with the structural
/// row of each position read straight off the walk.
fn walk_oracle(g: &Graph, strategy: WalkStrategy, s: usize, ell: usize) -> BTreeMap<Vec<u64>, f64> {
    fn rec(
        g: &Graph,
        nb: bool,
        s: usize,
        ell: usize,
        walk: &mut Vec<usize>,
        p: f64,
        out: &mut BTreeMap<Vec<u64>, f64>,
    ) {
        if walk.len() == ell + 1 {
            let key = (0..walk.len())
                .map(|i| {
                    let mut row = 0u64;
                    for j in 1..=s.min(i) {
                        if walk[i] == walk[i - j] {
                            row |= 1 << (j - 1);
                        }
                    }
                    for j in 1..s {
                        if i > j && g.is_edge(walk[i], walk[i - j - 1]) {
                            row |= 1 << (s + j - 1);
                        }
                    }
                    row
                })
                .collect();
            *out.entry(key).or_default() += p;
            return;
        }
        let cur = *walk.last().unwrap();
        let prev = walk.len().checked_sub(2).map(|i| walk[i]);
        let next: Vec<usize> = g
            .neighbors(cur)
            .iter()
            .copied()
            .filter(|&u| !(nb && g.degree(cur) > 1 && Some(u) == prev))
            .collect();
        for &u in &next {
            walk.push(u);
            rec(g, nb, s, ell, walk, p / next.len() as f64, out);
            walk.pop();
        }
    }
    let mut out = BTreeMap::new();
    for v in 0..g.n_nodes() {
        let nb = strategy == WalkStrategy::NonBacktracking;
        rec(g, nb, s, ell, &mut vec![v], 1.0 / g.n_nodes() as f64, &mut out);
    }
    out
}

fn exact(g: &Graph, strategy: WalkStrategy, s: usize, ell: usize) -> FeatureDistribution {
    exact_feature_distribution(g, strategy, s, ell, DEFAULT_BUDGET).unwrap()
}

fn exact_map(d: &FeatureDistribution) -> BTreeMap<Vec<u64>, f64> {
    let Masses::Exact(m) = &d.masses else { panic!("expected exact masses") };
    m.iter().map(|(k, p)| (k.clone(), p.to_f64().unwrap())).collect()
}

fn oracle_tv(p: &BTreeMap<Vec<u64>, f64>, q: &BTreeMap<Vec<u64>, f64>) -> f64 {
    let keys: std::collections::BTreeSet<_> = p.keys().chain(q.keys()).collect();
    0.5 * keys
        .into_iter()
        .map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

#[test]
fn exact_distribution_matches_walk_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..40 {
        let n = rng.gen_range(2..=7);
        let p = rng.gen_range(0.2..0.8);
        let g = common::random_graph(&mut rng, n, p);
        let s = rng.gen_range(1..=5);
        let ell = rng.gen_range(1..=6);
        for strategy in STRATEGIES {
            let got = exact_map(&exact(&g, strategy, s, ell));
            let want = walk_oracle(&g, strategy, s, ell);
            assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>(), "case {case}");
            for (k, p) in &want {
                assert!((got[k] - p).abs() < 1e-12, "case {case} {strategy}");
            }
        }
    }
}

#[test]
fn exact_tv_matches_walk_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..20 {
        let a = common::random_graph(&mut rng, 6, 0.4);
        let b = common::random_graph(&mut rng, 6, 0.4);
        for strategy in STRATEGIES {
            let tv = tv_distance(&exact(&a, strategy, 3, 5), &exact(&b, strategy, 3, 5)).unwrap();
            let want = oracle_tv(&walk_oracle(&a, strategy, 3, 5), &walk_oracle(&b, strategy, 3, 5));
            assert!((tv.value - want).abs() < 1e-12);
            assert!((tv.rational.unwrap().to_f64().unwrap() - want).abs() < 1e-12);
        }
    }
}

#[test]
fn sampled_distribution_converges_to_exact() {
    let g = make_cycle(6).unwrap();
    for strategy in STRATEGIES {
        let e = exact(&g, strategy, 3, 6);
        let d = sampled_feature_distribution(&g, strategy, 3, 6, 1_000_000, 9).unwrap();
        let tv = tv_distance(&d, &e).unwrap();
        assert!(tv.value < 0.02, "{strategy}: {}", tv.value);
    }
    let c8 = make_cycle(8).unwrap();
    let c4 = make_cycle(4).unwrap();
    let split = disjoint_union(&c4, &c4);
    let sampled = |g: &Graph| sampled_feature_distribution(g, WalkStrategy::Uniform, 4, 8, 200_000, 3).unwrap();
    let exact_tv = tv_distance(&exact(&c8, WalkStrategy::Uniform, 4, 8), &exact(&split, WalkStrategy::Uniform, 4, 8))
        .unwrap()
        .value;
    let sampled_tv = tv_distance(&sampled(&c8), &sampled(&split)).unwrap().value;
    assert!((exact_tv - sampled_tv).abs() < 0.05, "{exact_tv} vs {sampled_tv}");
}

#[test]
fn cycle_splits_vanish_below_the_short_cycle() {
    for m in [4usize, 5] {
        let split = disjoint_union(&make_cycle(m).unwrap(), &make_cycle(m).unwrap());
        let big = make_cycle(2 * m).unwrap();
        for strategy in STRATEGIES {
            for s in 1..=m + 1 {
                let tv = tv_distance(&exact(&big, strategy, s, 2 * m), &exact(&split, strategy, s, 2 * m)).unwrap();
                let want = oracle_tv(&walk_oracle(&big, strategy, s, 2 * m), &walk_oracle(&split, strategy, s, 2 * m));
                assert!((tv.value - want).abs() < 1e-12);
                assert_eq!(tv.is_exactly_zero(), s + 2 <= m, "m {m} s {s} {strategy}");
            }
        }
    }
}

#[test]
fn three_path_pairs_hide_from_non_backtracking_walks() {
    for ell in 1..=10 {
        let r = nb_indistinguishability_check(3, ell).unwrap();
        assert_eq!(r.s, 3);
        assert!(r.tv_nb.is_exactly_zero(), "ell {ell}");
    }
    let r = nb_indistinguishability_check(4, 9).unwrap();
    assert!(r.tv_nb.is_exactly_zero());
}

#[test]
fn csl_classes_are_isomorphism_classes() {
    let ds = make_csl_dataset();
    let by_class = |c: usize| -> Vec<&Graph> {
        ds.graphs()
            .iter()
            .filter(|g| matches!(g.label(), Some(Label::Class(k)) if k == c))
            .collect()
    };
    for c in 0..10 {
        let members = by_class(c);
        assert_eq!(members.len(), 15);
        for h in &members[1..] {
            let f = find_isomorphism(members[0], h).expect("same class");
            for &(u, v) in members[0].edges() {
                assert!(h.is_edge(f[u], f[v]));
            }
        }
    }
    for (i, a) in [2usize, 3, 4, 5].iter().enumerate() {
        for b in &[2usize, 3, 4, 5][i + 1..] {
            assert!(find_isomorphism(&make_csl(41, *a).unwrap(), &make_csl(41, *b).unwrap()).is_none());
        }
    }
}
