//! Affine maps, ReLU and dropout on `[rows, features]` tensors.

use rand::Rng;

use super::linalg::{gemm, View};
use super::Tensor;
use crate::error::{Error, Result};

/// `x · w + b` with `w` of shape `[in, out]`.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&[f64]>) -> Result<Tensor> {
    w.expect_rank(2, "linear weight")?;
    let [fin, fout] = [w.shape()[0], w.shape()[1]];
    if x.channels() != fin {
        return Err(Error::invalid(format!(
            "linear: input width {} but weight expects {fin}",
            x.channels()
        )));
    }
    if let Some(b) = b {
        if b.len() != fout {
            return Err(Error::invalid("linear: bias length mismatch"));
        }
    }
    let rows = x.len() / fin.max(1);
    let mut out = Tensor::zeros(&[rows, fout]);
    if let Some(b) = b {
        for r in out.data_mut().chunks_exact_mut(fout) {
            r.copy_from_slice(b);
        }
    }
    gemm(
        View::row_major(x.data(), rows, fin),
        View::row_major(w.data(), fin, fout),
        1.0,
        out.data_mut(),
        fout,
    );
    out.check_finite("linear")?;
    Ok(out)
}

/// Returns `(grad_x, grad_w, grad_b)`.
pub fn linear_backward(x: &Tensor, w: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor, Vec<f64>) {
    let [fin, fout] = [w.shape()[0], w.shape()[1]];
    let rows = grad_out.len() / fout.max(1);
    let mut gx = Tensor::zeros(&[rows, fin]);
    gemm(
        View::row_major(grad_out.data(), rows, fout),
        View::row_major(w.data(), fin, fout).t(),
        0.0,
        gx.data_mut(),
        fin,
    );
    let mut gw = Tensor::zeros(w.shape());
    gemm(
        View::row_major(x.data(), rows, fin).t(),
        View::row_major(grad_out.data(), rows, fout),
        0.0,
        gw.data_mut(),
        fout,
    );
    let mut gb = vec![0.0; fout];
    for r in grad_out.data().chunks_exact(fout) {
        for (a, v) in gb.iter_mut().zip(r) {
            *a += v;
        }
    }
    (gx, gw, gb)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    relu_inplace(&mut y);
    y
}

pub fn relu_inplace(x: &mut Tensor) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Gradient through a ReLU given its output.
pub fn relu_backward(y: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    relu_backward_inplace(y, &mut g);
    g
}

pub fn relu_backward_inplace(y: &Tensor, grad: &mut Tensor) {
    for (gv, yv) in grad.data_mut().iter_mut().zip(y.data()) {
        if *yv <= 0.0 {
            *gv = 0.0;
        }
    }
}

/// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`. Returns
/// the output and the per-entry multiplier used.
pub fn dropout(x: &Tensor, rate: f64, rng: &mut impl Rng) -> Result<(Tensor, Vec<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok((x.clone(), vec![1.0; x.len()]));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, mask))
}

pub fn dropout_backward(mask: &[f64], grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (v, m) in g.data_mut().iter_mut().zip(mask) {
        *v *= m;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_bias() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, -4.0, 5.0, 6.0]).unwrap();
        let w = Tensor::zeros(&[3, 2]);
        let y = linear(&x, &w, Some(&[0.5, -1.0])).unwrap();
        assert_eq!(y.data(), &[0.5, -1.0, 0.5, -1.0]);
        assert!(linear(&x, &Tensor::zeros(&[2, 2]), None).is_err());
    }

    #[test]
    fn dropout_zero_is_identity() {
        let x = Tensor::from_fn(&[4, 4], |i| i as f64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dropout(&x, 0.0, &mut rng).unwrap().0, x);
    }

    #[test]
    fn dropout_preserves_mean() {
        let n = 100_000;
        let x = Tensor::from_vec(&[n, 1], vec![1.0; n]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (y, _) = dropout(&x, 0.5, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }
}
