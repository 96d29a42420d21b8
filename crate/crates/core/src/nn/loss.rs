//! Batch-mean losses returning the loss value and its gradient.

use super::Tensor;
use crate::error::{Error, Result};

/// Numerically stable softmax of each row.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let c = logits.channels();
    let mut p = logits.clone();
    for r in p.data_mut().chunks_exact_mut(c) {
        let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in r.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        r.iter_mut().for_each(|v| *v /= z);
    }
    p
}

/// Mean cross-entropy of `[batch, classes]` logits. The gradient is
/// `(softmax − onehot) / batch`.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let c = logits.channels();
    let b = logits.len() / c.max(1);
    if targets.len() != b {
        return Err(Error::invalid(format!("{} targets for {b} rows", targets.len())));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::invalid(format!("target class {t} >= {c}")));
    }
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, (row, &t)) in grad.data_mut().chunks_exact_mut(c).zip(targets).enumerate() {
        let lrow = &logits.data()[i * c..(i + 1) * c];
        let max = lrow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lrow.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - lrow[t];
        row[t] -= 1.0;
        row.iter_mut().for_each(|v| *v /= b as f64);
    }
    let loss = loss / b as f64;
    crate::error::ensure_finite("cross_entropy", &[loss])?;
    Ok((loss, grad))
}

/// Mean absolute error; the subgradient at zero residual is zero.
pub fn l1(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid("l1: length mismatch or empty input"));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_over_ten_classes() {
        let logits = Tensor::from_vec(&[1, 10], vec![0.3; 10]).unwrap();
        let (loss, _) = cross_entropy(&logits, &[4]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_softmax_minus_onehot() {
        let logits = Tensor::from_vec(&[2, 3], vec![0.1, -0.4, 2.0, 1.0, 1.5, -0.2]).unwrap();
        let targets = [2, 0];
        let (_, g) = cross_entropy(&logits, &targets).unwrap();
        let p = softmax_rows(&logits);
        for i in 0..2 {
            for j in 0..3 {
                let want = (p.data()[i * 3 + j] - f64::from(u8::from(j == targets[i]))) / 2.0;
                assert!((g.data()[i * 3 + j] - want).abs() < 1e-15);
            }
        }
        // central differences
        let h = 1e-5;
        for k in 0..6 {
            let mut plus = logits.clone();
            plus.data_mut()[k] += h;
            let mut minus = logits.clone();
            minus.data_mut()[k] -= h;
            let fd = (cross_entropy(&plus, &targets).unwrap().0 - cross_entropy(&minus, &targets).unwrap().0)
                / (2.0 * h);
            assert!((fd - g.data()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn l1_of_exact_prediction_is_zero() {
        let (loss, grad) = l1(&[1.0, -2.0], &[1.0, -2.0]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);
        assert_eq!(l1(&[3.0], &[1.0]).unwrap().0, 2.0);
    }
}
