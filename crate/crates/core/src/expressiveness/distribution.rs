use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;
use crate::walker::{sample_walks_from, WalkStrategy};
use crate::walkfeat::{for_each_structural_bit, Encodings};

/// Structural block of a walk feature matrix: one bitmask per row, bit `c`
/// set when structural column `c` is 1 (identity bits first, then
/// adjacency bits, as in the walk features).
pub type FeatureKey = Vec<u64>;

/// Largest supported window: `2s - 1` columns must fit one `u64`.
pub const MAX_WINDOW: usize = 32;

/// Default limit on DP states or enumerated walks.
pub const DEFAULT_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Masses {
    Exact(BTreeMap<FeatureKey, BigRational>),
    Sampled { samples: usize, freq: BTreeMap<FeatureKey, f64> },
}

/// Distribution of structural feature matrices of random walks started at
/// a uniformly random node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDistribution {
    pub strategy: WalkStrategy,
    pub s: usize,
    pub ell: usize,
    pub masses: Masses,
}

impl FeatureDistribution {
    pub fn support_size(&self) -> usize {
        match &self.masses {
            Masses::Exact(m) => m.len(),
            Masses::Sampled { freq, .. } => freq.len(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.masses, Masses::Exact(_))
    }

    pub fn mode_label(&self) -> String {
        match &self.masses {
            Masses::Exact(_) => "exact".into(),
            Masses::Sampled { samples, .. } => format!("sampled({samples})"),
        }
    }

    /// Probability of `key` as a float.
    pub fn probability(&self, key: &[u64]) -> f64 {
        match &self.masses {
            Masses::Exact(m) => m.get(key).map_or(0.0, to_f64),
            Masses::Sampled { freq, .. } => freq.get(key).copied().unwrap_or(0.0),
        }
    }

    /// Total mass: exactly one in exact mode.
    pub fn total_mass(&self) -> f64 {
        match &self.masses {
            Masses::Exact(m) => to_f64(&m.values().fold(BigRational::zero(), |a, b| a + b)),
            Masses::Sampled { freq, .. } => freq.values().sum(),
        }
    }

    pub fn exact_total(&self) -> Option<BigRational> {
        match &self.masses {
            Masses::Exact(m) => Some(m.values().fold(BigRational::zero(), |a, b| a + b)),
            Masses::Sampled { .. } => None,
        }
    }

    fn float_masses(&self) -> BTreeMap<&FeatureKey, f64> {
        match &self.masses {
            Masses::Exact(m) => m.iter().map(|(k, v)| (k, to_f64(v))).collect(),
            Masses::Sampled { freq, .. } => freq.iter().map(|(k, &v)| (k, v)).collect(),
        }
    }
}

/// Row-major bitstring of the `(ell + 1) × (2s - 1)` structural block.
pub fn encode_key(key: &[u64], s: usize) -> String {
    let width = 2 * s - 1;
    key.iter()
        .flat_map(|row| (0..width).map(move |c| if row >> c & 1 == 1 { '1' } else { '0' }))
        .collect()
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn check_params(s: usize, ell: usize) -> Result<()> {
    if s == 0 || s > MAX_WINDOW {
        return Err(Error::invalid(format!("window size must lie in 1..={MAX_WINDOW}, got {s}")));
    }
    if ell == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    Ok(())
}

/// Successors of `cur` given the previous node, if any.
fn successors(g: &Graph, strategy: WalkStrategy, cur: usize, prev: Option<usize>) -> Vec<usize> {
    let nbrs = g.neighbors(cur);
    match (strategy, prev) {
        (WalkStrategy::NonBacktracking, Some(p)) if nbrs.len() > 1 => nbrs.iter().copied().filter(|&u| u != p).collect(),
        _ => nbrs.to_vec(),
    }
}

/// Structural row of a new node `u` given the preceding nodes `hist`
/// (oldest first).
fn row_bits(g: &Graph, hist: &[usize], u: usize, s: usize) -> u64 {
    let mut row = 0u64;
    let len = hist.len();
    for j in 1..=s.min(len) {
        if hist[len - j] == u {
            row |= 1 << (j - 1);
        }
    }
    for j in 1..s {
        if j + 1 > len {
            break;
        }
        if g.is_edge(u, hist[len - j - 1]) {
            row |= 1 << (s + j - 1);
        }
    }
    row
}

/// Exact distribution by dynamic programming over (recent nodes, emitted
/// rows). Fails with a resource error once more than `budget` states are
/// alive.
pub fn exact_feature_distribution(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    budget: usize,
) -> Result<FeatureDistribution> {
    check_params(s, ell)?;
    let keep = s.max(2);
    let n = g.n_nodes();
    let start = BigRational::new(BigInt::one(), BigInt::from(n));
    let mut states: HashMap<(Vec<usize>, FeatureKey), BigRational> = (0..n)
        .map(|v| ((vec![v], vec![0u64]), start.clone()))
        .collect();
    for _ in 0..ell {
        let mut next: HashMap<(Vec<usize>, FeatureKey), BigRational> = HashMap::with_capacity(states.len() * 2);
        for ((hist, rows), p) in states {
            let cur = hist[hist.len() - 1];
            let prev = (hist.len() >= 2).then(|| hist[hist.len() - 2]);
            let succ = successors(g, strategy, cur, prev);
            let q = p / BigInt::from(succ.len());
            for u in succ {
                let row = row_bits(g, &hist, u, s);
                let mut h = hist.clone();
                h.push(u);
                if h.len() > keep {
                    h.remove(0);
                }
                let mut r = rows.clone();
                r.push(row);
                *next.entry((h, r)).or_insert_with(BigRational::zero) += &q;
            }
        }
        if next.len() > budget {
            return Err(Error::Resource(format!(
                "exact distribution needs more than {budget} states (s = {s}, ell = {ell}); use sampled mode"
            )));
        }
        states = next;
    }
    let mut masses: BTreeMap<FeatureKey, BigRational> = BTreeMap::new();
    for ((_, rows), p) in states {
        *masses.entry(rows).or_insert_with(BigRational::zero) += p;
    }
    Ok(FeatureDistribution {
        strategy,
        s,
        ell,
        masses: Masses::Exact(masses),
    })
}

/// Exact distribution by listing every walk with its probability. Much
/// slower than [`exact_feature_distribution`]; serves as its cross-check.
pub fn enumerate_feature_distribution(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    budget: usize,
) -> Result<FeatureDistribution> {
    check_params(s, ell)?;
    let mut masses: BTreeMap<FeatureKey, BigRational> = BTreeMap::new();
    let mut walks = 0usize;
    let mut walk = Vec::with_capacity(ell + 1);
    let start = BigRational::new(BigInt::one(), BigInt::from(g.n_nodes()));
    for v in 0..g.n_nodes() {
        walk.push(v);
        extend(g, strategy, s, ell, &mut walk, start.clone(), &mut masses, &mut walks, budget)?;
        walk.pop();
    }
    Ok(FeatureDistribution {
        strategy,
        s,
        ell,
        masses: Masses::Exact(masses),
    })
}

#[allow(clippy::too_many_arguments)]
fn extend(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    walk: &mut Vec<usize>,
    p: BigRational,
    masses: &mut BTreeMap<FeatureKey, BigRational>,
    walks: &mut usize,
    budget: usize,
) -> Result<()> {
    if walk.len() == ell + 1 {
        *walks += 1;
        if *walks > budget {
            return Err(Error::Resource(format!(
                "more than {budget} walks to enumerate; use the dynamic program or sampled mode"
            )));
        }
        let key: FeatureKey = (0..walk.len())
            .map(|i| {
                let mut row = 0u64;
                for_each_structural_bit(g, walk, i, s, Encodings::BOTH, |c| row |= 1 << c);
                row
            })
            .collect();
        *masses.entry(key).or_insert_with(BigRational::zero) += p;
        return Ok(());
    }
    let cur = walk[walk.len() - 1];
    let prev = (walk.len() >= 2).then(|| walk[walk.len() - 2]);
    let succ = successors(g, strategy, cur, prev);
    let q = p / BigInt::from(succ.len());
    for u in succ {
        walk.push(u);
        extend(g, strategy, s, ell, walk, q.clone(), masses, walks, budget)?;
        walk.pop();
    }
    Ok(())
}

/// Empirical distribution of `samples` walks with uniformly drawn start
/// nodes.
pub fn sampled_feature_distribution(
    g: &Graph,
    strategy: WalkStrategy,
    s: usize,
    ell: usize,
    samples: usize,
    seed: u64,
) -> Result<FeatureDistribution> {
    check_params(s, ell)?;
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    const CHUNK: usize = 1 << 16;
    let mut counts: BTreeMap<FeatureKey, u64> = BTreeMap::new();
    let mut done = 0;
    let mut chunk_idx = 0u64;
    while done < samples {
        let take = CHUNK.min(samples - done);
        let chunk_seed = rng::derive_indexed(seed, &[chunk_idx]);
        let mut r = rng::stream(chunk_seed, u64::MAX - 1);
        let starts: Vec<usize> = (0..take).map(|_| r.gen_range(0..g.n_nodes())).collect();
        let ws = sample_walks_from(g, strategy, &starts, ell, chunk_seed)?;
        for walk in ws.iter() {
            let key: FeatureKey = (0..walk.len())
                .map(|i| {
                    let mut row = 0u64;
                    for_each_structural_bit(g, walk, i, s, Encodings::BOTH, |c| row |= 1 << c);
                    row
                })
                .collect();
            *counts.entry(key).or_default() += 1;
        }
        done += take;
        chunk_idx += 1;
    }
    let freq = counts.into_iter().map(|(k, c)| (k, c as f64 / samples as f64)).collect();
    Ok(FeatureDistribution {
        strategy,
        s,
        ell,
        masses: Masses::Sampled { samples, freq },
    })
}

/// Total variation distance; exact when both inputs are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvDistance {
    pub value: f64,
    /// `num/den` in lowest terms, when exact.
    pub exact: Option<String>,
    #[serde(skip)]
    pub rational: Option<BigRational>,
}

impl TvDistance {
    pub fn is_exactly_zero(&self) -> bool {
        self.rational.as_ref().is_some_and(Zero::is_zero)
    }
}

/// Half the ℓ1 distance over the union of supports.
pub fn tv_distance(p: &FeatureDistribution, q: &FeatureDistribution) -> Result<TvDistance> {
    if p.s != q.s || p.ell != q.ell {
        return Err(Error::invalid(format!(
            "distributions differ in parameters: (s, ell) = ({}, {}) vs ({}, {})",
            p.s, p.ell, q.s, q.ell
        )));
    }
    if let (Masses::Exact(a), Masses::Exact(b)) = (&p.masses, &q.masses) {
        let mut sum = BigRational::zero();
        for (k, pa) in a {
            sum += match b.get(k) {
                Some(pb) => (pa - pb).abs(),
                None => pa.clone(),
            };
        }
        for (k, pb) in b {
            if !a.contains_key(k) {
                sum += pb;
            }
        }
        let tv = sum / BigInt::from(2);
        return Ok(TvDistance {
            value: to_f64(&tv),
            exact: Some(tv.to_string()),
            rational: Some(tv),
        });
    }
    let (a, b) = (p.float_masses(), q.float_masses());
    let mut sum = 0.0;
    for (k, pa) in &a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in &b {
        if !a.contains_key(k) {
            sum += pb;
        }
    }
    Ok(TvDistance {
        value: sum / 2.0,
        exact: None,
        rational: None,
    })
}
