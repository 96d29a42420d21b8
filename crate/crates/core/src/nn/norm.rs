//! Batch normalization over all leading axes, per channel (last axis).

use super::Tensor;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Saved state of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    /// Batch mean and unbiased batch variance, for the running averages.
    pub batch_mean: Vec<f64>,
    pub batch_var_unbiased: Vec<f64>,
}

/// Training-mode normalization with batch statistics.
pub fn batch_norm_train(x: &Tensor, gamma: &[f64], beta: &[f64], eps: f64) -> Result<(Tensor, BnCache)> {
    let c = x.channels();
    if gamma.len() != c || beta.len() != c {
        return Err(Error::invalid(format!("batch_norm: {c} channels, {} scales", gamma.len())));
    }
    let rows = x.len().checked_div(c).unwrap_or(0);
    if rows < 2 {
        return Err(Error::invalid(format!(
            "batch_norm: training needs at least 2 rows, got {rows}"
        )));
    }
    let xd = x.data();
    let mut mean = vec![0.0; c];
    for r in xd.chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; c];
    for r in xd.chunks_exact(c) {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let unbiased: Vec<f64> = var.iter().map(|s| s / (rows - 1) as f64).collect();
    var.iter_mut().for_each(|s| *s /= rows as f64);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut xhat = vec![0.0; xd.len()];
    let mut out = Tensor::zeros(x.shape());
    for ((xr, hr), or) in xd
        .chunks_exact(c)
        .zip(xhat.chunks_exact_mut(c))
        .zip(out.data_mut().chunks_exact_mut(c))
    {
        for ch in 0..c {
            let h = (xr[ch] - mean[ch]) * inv_std[ch];
            hr[ch] = h;
            or[ch] = gamma[ch] * h + beta[ch];
        }
    }
    out.check_finite("batch_norm")?;
    Ok((
        out,
        BnCache {
            xhat,
            inv_std,
            batch_mean: mean,
            batch_var_unbiased: unbiased,
        },
    ))
}

/// Returns `(grad_x, grad_gamma, grad_beta)`.
pub fn batch_norm_backward(cache: &BnCache, gamma: &[f64], grad_out: &Tensor) -> (Tensor, Vec<f64>, Vec<f64>) {
    let c = gamma.len();
    let g = grad_out.data();
    let rows = g.len() / c;
    let mut gbeta = vec![0.0; c];
    let mut ggamma = vec![0.0; c];
    for (gr, hr) in g.chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
        for ch in 0..c {
            gbeta[ch] += gr[ch];
            ggamma[ch] += gr[ch] * hr[ch];
        }
    }
    let n = rows as f64;
    let mut gx = Tensor::zeros(grad_out.shape());
    for ((xr, gr), hr) in gx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(g.chunks_exact(c))
        .zip(cache.xhat.chunks_exact(c))
    {
        for ch in 0..c {
            xr[ch] = gamma[ch] * cache.inv_std[ch] / n * (n * gr[ch] - gbeta[ch] - hr[ch] * ggamma[ch]);
        }
    }
    (gx, ggamma, gbeta)
}

/// Inference-mode normalization with frozen statistics.
pub fn batch_norm_eval(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Result<Tensor> {
    let c = x.channels();
    if gamma.len() != c || mean.len() != c {
        return Err(Error::invalid("batch_norm: channel mismatch"));
    }
    let scale: Vec<f64> = (0..c).map(|ch| gamma[ch] / (var[ch] + eps).sqrt()).collect();
    let shift: Vec<f64> = (0..c).map(|ch| beta[ch] - mean[ch] * scale[ch]).collect();
    let mut out = x.clone();
    for r in out.data_mut().chunks_exact_mut(c) {
        for ((v, a), b) in r.iter_mut().zip(&scale).zip(&shift) {
            *v = *v * a + b;
        }
    }
    out.check_finite("batch_norm")?;
    Ok(out)
}

/// Gradient of [`batch_norm_eval`] with respect to its input.
pub fn batch_norm_eval_backward(gamma: &[f64], var: &[f64], eps: f64, grad_out: &Tensor) -> Tensor {
    let c = gamma.len();
    let scale: Vec<f64> = (0..c).map(|ch| gamma[ch] / (var[ch] + eps).sqrt()).collect();
    let mut gx = grad_out.clone();
    for r in gx.data_mut().chunks_exact_mut(c) {
        for (v, a) in r.iter_mut().zip(&scale) {
            *v *= a;
        }
    }
    gx
}

/// Exponential update `running ← (1 − momentum)·running + momentum·batch`.
pub fn update_running(running: &mut [f64], batch: &[f64], momentum: f64) {
    for (r, b) in running.iter_mut().zip(batch) {
        *r = (1.0 - momentum) * *r + momentum * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_input_maps_to_shift() {
        let x = Tensor::from_vec(&[4, 2], vec![3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0]).unwrap();
        let (y, _) = batch_norm_train(&x, &[2.0, 0.5], &[0.25, -0.75], BN_EPS).unwrap();
        for r in y.data().chunks(2) {
            assert!((r[0] - 0.25).abs() < 1e-12);
            assert!((r[1] + 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_normal_input_is_standardized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let x = Tensor::from_fn(&[n, 3], |i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (1.0 + (i % 3) as f64) + (i % 3) as f64
        });
        let (y, _) = batch_norm_train(&x, &[1.0; 3], &[0.0; 3], BN_EPS).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = y.data().iter().skip(ch).step_by(3).copied().collect();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 0.05);
            assert!((var - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn eval_mode_is_row_independent() {
        let x = Tensor::from_vec(&[3, 1], vec![1.0, 2.0, 4.0]).unwrap();
        let one = Tensor::from_vec(&[1, 1], vec![2.0]).unwrap();
        let a = batch_norm_eval(&x, &[1.5], &[0.1], &[0.5], &[2.0], BN_EPS).unwrap();
        let b = batch_norm_eval(&one, &[1.5], &[0.1], &[0.5], &[2.0], BN_EPS).unwrap();
        assert_eq!(a.data()[1], b.data()[0]);
    }

    #[test]
    fn training_needs_two_rows() {
        let x = Tensor::from_vec(&[1, 2], vec![1.0, 2.0]).unwrap();
        assert!(batch_norm_train(&x, &[1.0; 2], &[0.0; 2], BN_EPS).is_err());
    }
}
