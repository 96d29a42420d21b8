//! What walk feature matrices can and cannot tell apart.
//!
//! A model only sees samples of walk feature matrices, so two graphs whose
//! distributions of structural feature matrices coincide are
//! indistinguishable for it. This module computes those distributions
//! exactly (as rationals) or by sampling, compares them in total variation
//! distance, and provides brute-force isomorphism oracles for walk windows
//! and whole graphs.

mod distribution;
mod isomorphism;

use serde::{Deserialize, Serialize};

pub use distribution::{
    encode_key, enumerate_feature_distribution, exact_feature_distribution, sampled_feature_distribution,
    tv_distance, FeatureDistribution, FeatureKey, Masses, TvDistance, DEFAULT_BUDGET, MAX_WINDOW,
};
pub use isomorphism::{find_isomorphism, is_isomorphic, walklet_subgraph_oracle, WindowVerdict};

use crate::error::{Error, Result};
use crate::graph::{make_three_paths, Graph};
use crate::walker::WalkStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DistributionMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

/// Feature distribution of `g` in the requested mode.
pub fn feature_distribution(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    mode: DistributionMode,
) -> Result<FeatureDistribution> {
    feature_distribution_within(g, strategy, s, ell, mode, DEFAULT_BUDGET)
}

/// [`feature_distribution`] with an explicit state budget for exact mode.
pub fn feature_distribution_within(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    mode: DistributionMode,
    budget: usize,
) -> Result<FeatureDistribution> {
    match mode {
        DistributionMode::Exact => exact_feature_distribution(g, strategy, s, ell, budget),
        DistributionMode::Sampled { samples, seed } => sampled_feature_distribution(g, strategy, s, ell, samples, seed),
    }
}

/// Comparison of two graphs' feature distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistinguishReport {
    pub graphs: [String; 2],
    pub strategy: WalkStrategy,
    pub s: usize,
    pub ell: usize,
    pub tv: TvDistance,
    pub support_sizes: [usize; 2],
    pub mode: String,
}

pub fn compare_graphs(
    names: [&str; 2],
    g1: &Graph,
    g2: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    mode: DistributionMode,
) -> Result<DistinguishReport> {
    compare_graphs_within(names, [g1, g2], strategy, s, ell, mode, DEFAULT_BUDGET)
}

/// [`compare_graphs`] with an explicit state budget for exact mode.
pub fn compare_graphs_within(
    names: [&str; 2],
    [g1, g2]: [&Graph; 2],
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    mode: DistributionMode,
    budget: usize,
) -> Result<DistinguishReport> {
    let p = feature_distribution_within(g1, strategy, s, ell, mode, budget)?;
    let q = feature_distribution_within(g2, strategy, s, ell, mode, budget)?;
    Ok(DistinguishReport {
        graphs: [names[0].to_string(), names[1].to_string()],
        strategy,
        s,
        ell,
        tv: tv_distance(&p, &q)?,
        support_sizes: [p.support_size(), q.support_size()],
        mode: p.mode_label(),
    })
}

/// Result of comparing the balanced and unbalanced three-path graphs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreePathReport {
    pub n: usize,
    /// Window size `2n - 3`.
    pub s: usize,
    pub ell: usize,
    pub order: usize,
    /// Non-backtracking walks in both graphs all produce the all-zero
    /// structural block.
    pub nb_all_zero: bool,
    pub nb_support_sizes: [usize; 2],
    pub tv_nb: TvDistance,
    /// Uniform walks, when the exact computation fits the budget.
    pub tv_uniform: Option<TvDistance>,
}

/// Compares `G_n` (three paths of length `n` between two nodes) with `G'_n`
/// (lengths `n - 1`, `n`, `n + 1`) at window size `s = 2n - 3`. The
/// shortest cycle of `G'_n` has length `s + 2`, so no window of a
/// non-backtracking walk closes a cycle or revisits a node.
pub fn nb_indistinguishability_check(n: usize, ell: usize) -> Result<ThreePathReport> {
    if n < 2 {
        return Err(Error::invalid("three-path comparison needs n >= 2"));
    }
    let s = 2 * n - 3;
    let g = make_three_paths(n, true)?;
    let h = make_three_paths(n, false)?;
    let p = exact_feature_distribution(&g, WalkStrategy::NonBacktracking, s, ell, DEFAULT_BUDGET)?;
    let q = exact_feature_distribution(&h, WalkStrategy::NonBacktracking, s, ell, DEFAULT_BUDGET)?;
    let all_zero = |d: &FeatureDistribution| match &d.masses {
        Masses::Exact(m) => m.len() == 1 && m.keys().all(|k| k.iter().all(|&r| r == 0)),
        Masses::Sampled { .. } => false,
    };
    let tv_uniform = match (
        exact_feature_distribution(&g, WalkStrategy::Uniform, s, ell, DEFAULT_BUDGET),
        exact_feature_distribution(&h, WalkStrategy::Uniform, s, ell, DEFAULT_BUDGET),
    ) {
        (Ok(a), Ok(b)) => Some(tv_distance(&a, &b)?),
        (Err(Error::Resource(_)), _) | (_, Err(Error::Resource(_))) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(ThreePathReport {
        n,
        s,
        ell,
        order: g.n_nodes(),
        nb_all_zero: all_zero(&p) && all_zero(&q),
        nb_support_sizes: [p.support_size(), q.support_size()],
        tv_nb: tv_distance(&p, &q)?,
        tv_uniform,
    })
}
