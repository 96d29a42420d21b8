use super::batch::GraphBatch;
use crate::nn::Tensor;

/// Range of CNN output positions whose walk row is an admissible walklet
/// center: row `j = q + s/2` with `s/2 < j < ell - s/2`.
pub fn center_positions(ell: usize, s: usize) -> std::ops::Range<usize> {
    1..ell.saturating_sub(s)
}

/// Number of admissible centers falling on each node of the batch.
pub fn center_counts(batch: &GraphBatch) -> Vec<u32> {
    let mut counts = vec![0u32; batch.n_nodes()];
    let half = batch.window / 2;
    for w in 0..batch.num_walks() {
        for q in center_positions(batch.ell(), batch.window) {
            counts[batch.node_at(w, q + half)] += 1;
        }
    }
    counts
}

/// Mean of the CNN outputs `[m, ell + 1 - s, c]` over all centers that fall
/// on each node. Nodes without a center receive zeros.
pub fn pool_centers(out: &Tensor, batch: &GraphBatch, counts: &[u32]) -> Tensor {
    let c = out.channels();
    let positions = batch.ell() + 1 - batch.window;
    let half = batch.window / 2;
    let mut pooled = Tensor::zeros(&[batch.n_nodes(), c]);
    let data = out.data();
    let acc = pooled.data_mut();
    for w in 0..batch.num_walks() {
        for q in center_positions(batch.ell(), batch.window) {
            let v = batch.node_at(w, q + half);
            let src = &data[(w * positions + q) * c..][..c];
            for (a, x) in acc[v * c..(v + 1) * c].iter_mut().zip(src) {
                *a += x;
            }
        }
    }
    for (row, &n) in acc.chunks_exact_mut(c).zip(counts) {
        if n > 1 {
            let inv = 1.0 / f64::from(n);
            row.iter_mut().for_each(|x| *x *= inv);
        }
    }
    pooled
}

pub fn pool_centers_backward(grad: &Tensor, batch: &GraphBatch, counts: &[u32], c: usize) -> Tensor {
    let positions = batch.ell() + 1 - batch.window;
    let half = batch.window / 2;
    let mut gout = Tensor::zeros(&[batch.num_walks(), positions, c]);
    let g = grad.data();
    let dst = gout.data_mut();
    for w in 0..batch.num_walks() {
        for q in center_positions(batch.ell(), batch.window) {
            let v = batch.node_at(w, q + half);
            let inv = 1.0 / f64::from(counts[v]);
            for (o, x) in dst[(w * positions + q) * c..][..c].iter_mut().zip(&g[v * c..(v + 1) * c]) {
                *o = x * inv;
            }
        }
    }
    gout
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::make_cycle;
    use crate::walker::{sample_walks, WalkStrategy};
    use crate::walkfeat::Encodings;

    #[test]
    fn strict_center_range() {
        // ell = 10, s = 4: rows 3..=7 are centers, output positions 1..=5
        assert_eq!(center_positions(10, 4), 1..6);
        assert!(center_positions(4, 4).is_empty());
        assert!(center_positions(5, 4).is_empty());
    }

    #[test]
    fn counts_match_total_centers() {
        let g = make_cycle(7).unwrap();
        let ws = sample_walks(&g, WalkStrategy::NonBacktracking, 1.0, 12, 3).unwrap();
        let b = GraphBatch::from_walks(&[&g], &[ws], 4, Encodings::BOTH).unwrap();
        let counts = center_counts(&b);
        let total: u32 = counts.iter().sum();
        assert_eq!(total as usize, 7 * center_positions(12, 4).len());
    }

    #[test]
    fn pooling_averages_and_zero_fills() {
        let g = make_cycle(5).unwrap();
        // one walk 0-1-2-3-4-0-1 (ell 6), s = 2: centers at rows 2..=4
        let ws = crate::walker::WalkSet::from_rows(&[vec![0, 1, 2, 3, 4, 0, 1]], WalkStrategy::Uniform, 0).unwrap();
        let b = GraphBatch::from_walks(&[&g], &[ws], 2, Encodings::BOTH).unwrap();
        let counts = center_counts(&b);
        assert_eq!(counts, vec![0, 0, 1, 1, 1]);
        let out = Tensor::from_fn(&[1, 5, 1], |i| i as f64 * 10.0);
        let p = pool_centers(&out, &b, &counts);
        assert_eq!(p.data(), &[0.0, 0.0, 10.0, 20.0, 30.0]);
    }
}
