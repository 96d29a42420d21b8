//! Unpadded 1D convolutions over `[batch, length, channels]` tensors.
//!
//! The batch axis holds walks and the length axis runs along each walk.

use super::linalg::{gemm, View};
use super::Tensor;
use crate::error::{Error, Result};

fn conv_dims(input: &Tensor, k: usize, what: &str) -> Result<(usize, usize, usize, usize)> {
    input.expect_rank(3, what)?;
    let [m, l, c] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    if k == 0 {
        return Err(Error::invalid(format!("{what}: kernel size must be positive")));
    }
    if l < k {
        return Err(Error::invalid(format!(
            "{what}: sequence length {l} shorter than kernel {k}"
        )));
    }
    Ok((m, l, c, l - k + 1))
}

/// Cross-correlation with weights `[c_in, c_out, k]`, no bias.
pub fn conv1d(input: &Tensor, weight: &Tensor) -> Result<Tensor> {
    weight.expect_rank(3, "conv1d weight")?;
    let [cin, cout, k] = [weight.shape()[0], weight.shape()[1], weight.shape()[2]];
    let (m, l, c, lo) = conv_dims(input, k, "conv1d")?;
    if c != cin {
        return Err(Error::invalid(format!("conv1d: input has {c} channels, weight expects {cin}")));
    }
    let mut out = Tensor::zeros(&[m, lo, cout]);
    let x = input.data();
    let w = weight.data();
    if k == 1 {
        gemm(
            View::row_major(x, m * l, cin),
            View::row_major(w, cin, cout),
            0.0,
            out.data_mut(),
            cout,
        );
    } else {
        for b in 0..m {
            let o = &mut out.data_mut()[b * lo * cout..(b + 1) * lo * cout];
            for t in 0..k {
                let xs = &x[(b * l + t) * cin..(b * l + t + lo) * cin];
                let wt = View {
                    data: &w[t..],
                    rows: cin,
                    cols: cout,
                    rs: (cout * k) as isize,
                    cs: k as isize,
                };
                gemm(View::row_major(xs, lo, cin), wt, 1.0, o, cout);
            }
        }
    }
    out.check_finite("conv1d")?;
    Ok(out)
}

/// Gradients of [`conv1d`] with respect to input and weight.
pub fn conv1d_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor) {
    let [cin, cout, k] = [weight.shape()[0], weight.shape()[1], weight.shape()[2]];
    let [m, l] = [input.shape()[0], input.shape()[1]];
    let lo = l - k + 1;
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut gin = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    if k == 1 {
        gemm(
            View::row_major(g, m * l, cout),
            View::row_major(w, cin, cout).t(),
            0.0,
            gin.data_mut(),
            cin,
        );
        gemm(
            View::row_major(x, m * l, cin).t(),
            View::row_major(g, m * l, cout),
            0.0,
            gw.data_mut(),
            cout,
        );
        return (gin, gw);
    }
    let mut tap = vec![0.0; cin * cout];
    for t in 0..k {
        let wt_t = View {
            data: &w[t..],
            rows: cin,
            cols: cout,
            rs: (cout * k) as isize,
            cs: k as isize,
        }
        .t();
        tap.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..m {
            let gb = &g[b * lo * cout..(b + 1) * lo * cout];
            let gi = &mut gin.data_mut()[(b * l + t) * cin..(b * l + t + lo) * cin];
            gemm(View::row_major(gb, lo, cout), wt_t, 1.0, gi, cin);
            let xs = &x[(b * l + t) * cin..(b * l + t + lo) * cin];
            gemm(View::row_major(xs, lo, cin).t(), View::row_major(gb, lo, cout), 1.0, &mut tap, cout);
        }
        let gwd = gw.data_mut();
        for i in 0..cin {
            for o in 0..cout {
                gwd[(i * cout + o) * k + t] = tap[i * cout + o];
            }
        }
    }
    (gin, gw)
}

/// Channel-wise convolution with weights `[c, k]`.
pub fn depthwise_conv1d(input: &Tensor, weight: &Tensor) -> Result<Tensor> {
    weight.expect_rank(2, "depthwise weight")?;
    let [cw, k] = [weight.shape()[0], weight.shape()[1]];
    let (m, l, c, lo) = conv_dims(input, k, "depthwise_conv1d")?;
    if c != cw {
        return Err(Error::invalid(format!(
            "depthwise_conv1d: input has {c} channels, weight has {cw}"
        )));
    }
    let wt = tap_major(weight.data(), c, k);
    let x = input.data();
    let mut out = Tensor::zeros(&[m, lo, c]);
    let o = out.data_mut();
    for (b, ob) in o.chunks_exact_mut(lo * c).enumerate() {
        for (t, wrow) in wt.chunks_exact(c).enumerate() {
            let xb = &x[(b * l + t) * c..(b * l + t + lo) * c];
            for (orow, xrow) in ob.chunks_exact_mut(c).zip(xb.chunks_exact(c)) {
                let (orow, xrow) = (&mut orow[..c], &xrow[..c]);
                for i in 0..c {
                    orow[i] += xrow[i] * wrow[i];
                }
            }
        }
    }
    out.check_finite("depthwise_conv1d")?;
    Ok(out)
}

/// Gradients of [`depthwise_conv1d`] with respect to input and weight.
pub fn depthwise_conv1d_backward(input: &Tensor, weight: &Tensor, grad_out: &Tensor) -> (Tensor, Tensor) {
    let [c, k] = [weight.shape()[0], weight.shape()[1]];
    let l = input.shape()[1];
    let lo = l - k + 1;
    let wt = tap_major(weight.data(), c, k);
    let x = input.data();
    let g = grad_out.data();
    let mut gin = Tensor::zeros(input.shape());
    let mut gwt = vec![0.0; k * c];
    let gi = gin.data_mut();
    for (b, gb) in g.chunks_exact(lo * c).enumerate() {
        for (t, (wrow, acc)) in wt.chunks_exact(c).zip(gwt.chunks_exact_mut(c)).enumerate() {
            let range = (b * l + t) * c..(b * l + t + lo) * c;
            let rows = gi[range.clone()].chunks_exact_mut(c).zip(x[range].chunks_exact(c));
            for ((girow, xrow), grow) in rows.zip(gb.chunks_exact(c)) {
                let (girow, xrow, grow) = (&mut girow[..c], &xrow[..c], &grow[..c]);
                for i in 0..c {
                    girow[i] += grow[i] * wrow[i];
                    acc[i] += grow[i] * xrow[i];
                }
            }
        }
    }
    let mut gw = Tensor::zeros(weight.shape());
    let gwd = gw.data_mut();
    for ch in 0..c {
        for t in 0..k {
            gwd[ch * k + t] = gwt[t * c + ch];
        }
    }
    (gin, gw)
}

fn tap_major(w: &[f64], c: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; c * k];
    for ch in 0..c {
        for t in 0..k {
            out[t * c + ch] = w[ch * k + t];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    // Direct five-loop definition of valid cross-correlation.
    fn conv1d_naive(x: &Tensor, w: &Tensor) -> Tensor {
        let [m, l, cin] = [x.shape()[0], x.shape()[1], x.shape()[2]];
        let [_, cout, k] = [w.shape()[0], w.shape()[1], w.shape()[2]];
        let lo = l - k + 1;
        let mut out = Tensor::zeros(&[m, lo, cout]);
        for b in 0..m {
            for p in 0..lo {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for i in 0..cin {
                        for t in 0..k {
                            acc += x.data()[(b * l + p + t) * cin + i] * w.data()[(i * cout + o) * k + t];
                        }
                    }
                    out.data_mut()[(b * lo + p) * cout + o] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = random(&[2, 5, 3], &mut rng);
        let mut w = Tensor::zeros(&[3, 3, 1]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        assert_eq!(conv1d(&x, &w).unwrap(), x);
        let ones = Tensor::from_vec(&[3, 1], vec![1.0; 3]).unwrap();
        assert_eq!(depthwise_conv1d(&x, &ones).unwrap(), x);
    }

    #[test]
    fn full_length_kernel_gives_one_output() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = random(&[3, 4, 2], &mut rng);
        let w = random(&[2, 5, 4], &mut rng);
        assert_eq!(conv1d(&x, &w).unwrap().shape(), &[3, 1, 5]);
        let short = random(&[2, 5, 5], &mut rng);
        assert!(conv1d(&x, &short).is_err());
    }

    #[test]
    fn matches_naive_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (m, cin, cout) = (rng.gen_range(1..=8), rng.gen_range(1..=8), rng.gen_range(1..=8));
            let k = rng.gen_range(1..=8);
            let l = rng.gen_range(k..=8);
            let x = random(&[m, l, cin], &mut rng);
            let w = random(&[cin, cout, k], &mut rng);
            let got = conv1d(&x, &w).unwrap();
            let want = conv1d_naive(&x, &w);
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depthwise_equals_diagonal_conv() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (c, k) = (4, 3);
        let x = random(&[2, 7, c], &mut rng);
        let w = random(&[c, k], &mut rng);
        let mut full = Tensor::zeros(&[c, c, k]);
        for ch in 0..c {
            for t in 0..k {
                full.data_mut()[(ch * c + ch) * k + t] = w.data()[ch * k + t];
            }
        }
        let a = depthwise_conv1d(&x, &w).unwrap();
        let b = conv1d(&x, &full).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
