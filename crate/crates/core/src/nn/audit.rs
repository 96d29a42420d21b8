//! Finite-difference audit of every kernel's backward pass.
//!
//! Each kernel is reduced to a scalar by a fixed random projection
//! `L = Σ r ⊙ f(x)`, so its analytic gradient is the backward pass applied
//! to `r`. Inputs with several arguments are checked one argument at a time.

use rand::Rng;

use super::gradcheck::{activation_signature, grad_check, grad_check_piecewise, GradReport};
use super::layers::{BatchNorm, ConvModule, Mlp, Mode};
use super::norm::{batch_norm_backward, batch_norm_train, BN_EPS};
use super::{
    conv1d, conv1d_backward, cross_entropy, depthwise_conv1d, depthwise_conv1d_backward, dropout, dropout_backward,
    l1, linear, linear_backward, relu, relu_backward, ParamStore, Tensor,
};
use crate::rng::stream;

fn uniform(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Values bounded away from zero so ReLU and |·| stay differentiable under
/// the probe step.
fn off_zero(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.gen_range(0.1..1.0);
        if rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

fn dot(a: &Tensor, r: &Tensor) -> f64 {
    a.data().iter().zip(r.data()).map(|(x, y)| x * y).sum()
}

fn with_shape(t: &Tensor, data: &[f64]) -> Tensor {
    Tensor::from_vec(t.shape(), data.to_vec()).expect("probe keeps the shape")
}

fn check_store(
    name: &str,
    store: &mut ParamStore,
    mut loss: impl FnMut(&ParamStore) -> (f64, u64),
    mut backward: impl FnMut(&mut ParamStore),
) -> GradReport {
    store.zero_grad();
    backward(store);
    let analytic = store.flat_grads();
    let x0 = store.flat_values();
    let mut probe = store.clone();
    grad_check_piecewise(
        name,
        |p| {
            probe.set_flat_values(p).expect("same layout");
            loss(&probe)
        },
        &x0,
        &analytic,
    )
}

/// Checks every kernel and layer of the library against central
/// differences.
pub fn kernel_audit(seed: u64) -> Vec<GradReport> {
    let mut rng = stream(seed, 0);
    let mut out = Vec::new();

    // linear
    let x = uniform(&[5, 4], &mut rng);
    let w = uniform(&[4, 3], &mut rng);
    let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let r = uniform(&[5, 3], &mut rng);
    let (gx, gw, gb) = linear_backward(&x, &w, &r);
    out.push(grad_check("linear/input", |p| dot(&linear(&with_shape(&x, p), &w, Some(&b)).unwrap(), &r), x.data(), gx.data()));
    out.push(grad_check("linear/weight", |p| dot(&linear(&x, &with_shape(&w, p), Some(&b)).unwrap(), &r), w.data(), gw.data()));
    out.push(grad_check("linear/bias", |p| dot(&linear(&x, &w, Some(p)).unwrap(), &r), &b, &gb));

    // relu
    let x = off_zero(&[6, 5], &mut rng);
    let r = uniform(&[6, 5], &mut rng);
    let g = relu_backward(&relu(&x), &r);
    out.push(grad_check_piecewise(
        "relu",
        |p| {
            let y = relu(&with_shape(&x, p));
            (dot(&y, &r), activation_signature([y.data()]))
        },
        x.data(),
        g.data(),
    ));

    // dropout with a fixed mask
    let x = uniform(&[4, 6], &mut rng);
    let r = uniform(&[4, 6], &mut rng);
    let (_, mask) = dropout(&x, 0.3, &mut stream(seed, 1)).unwrap();
    let g = dropout_backward(&mask, &r);
    out.push(grad_check(
        "dropout",
        |p| dot(&dropout(&with_shape(&x, p), 0.3, &mut stream(seed, 1)).unwrap().0, &r),
        x.data(),
        g.data(),
    ));

    // convolutions, pointwise and wide
    for k in [1usize, 3] {
        let x = uniform(&[2, 7, 3], &mut rng);
        let w = uniform(&[3, 4, k], &mut rng);
        let r = uniform(&[2, 8 - k, 4], &mut rng);
        let (gx, gw) = conv1d_backward(&x, &w, &r);
        out.push(grad_check(&format!("conv1d(k={k})/input"), |p| dot(&conv1d(&with_shape(&x, p), &w).unwrap(), &r), x.data(), gx.data()));
        out.push(grad_check(&format!("conv1d(k={k})/weight"), |p| dot(&conv1d(&x, &with_shape(&w, p)).unwrap(), &r), w.data(), gw.data()));
    }
    let x = uniform(&[3, 9, 4], &mut rng);
    let w = uniform(&[4, 5], &mut rng);
    let r = uniform(&[3, 5, 4], &mut rng);
    let (gx, gw) = depthwise_conv1d_backward(&x, &w, &r);
    out.push(grad_check("depthwise_conv1d/input", |p| dot(&depthwise_conv1d(&with_shape(&x, p), &w).unwrap(), &r), x.data(), gx.data()));
    out.push(grad_check("depthwise_conv1d/weight", |p| dot(&depthwise_conv1d(&x, &with_shape(&w, p)).unwrap(), &r), w.data(), gw.data()));

    // batch norm with batch statistics
    let x = Tensor::from_fn(&[7, 3], |i| rng.gen_range(-1.0..1.0) * (1 + i % 3) as f64);
    let gamma: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..1.5)).collect();
    let beta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let r = uniform(&[7, 3], &mut rng);
    let (_, cache) = batch_norm_train(&x, &gamma, &beta, BN_EPS).unwrap();
    let (gx, gg, gb) = batch_norm_backward(&cache, &gamma, &r);
    let bn = |x: &Tensor, g: &[f64], b: &[f64]| dot(&batch_norm_train(x, g, b, BN_EPS).unwrap().0, &r);
    out.push(grad_check("batch_norm_train/input", |p| bn(&with_shape(&x, p), &gamma, &beta), x.data(), gx.data()));
    out.push(grad_check("batch_norm_train/gamma", |p| bn(&x, p, &beta), &gamma, &gg));
    out.push(grad_check("batch_norm_train/beta", |p| bn(&x, &gamma, p), &beta, &gb));

    // batch norm with running statistics, as a layer
    let mut store = ParamStore::new();
    let layer = BatchNorm::new(&mut store, "bn", 3);
    for (id, lo, hi) in [(layer.gamma, 0.5, 1.5), (layer.beta, -0.5, 0.5), (layer.running_mean, -0.5, 0.5), (layer.running_var, 0.5, 2.0)] {
        store.value_mut(id).iter_mut().for_each(|v| *v = rng.gen_range(lo..hi));
    }
    let x = uniform(&[5, 3], &mut rng);
    let r = uniform(&[5, 3], &mut rng);
    let (_, cache) = layer.forward(&store, &x, Mode::Eval).unwrap();
    store.zero_grad();
    let gx = layer.backward(&mut store, &cache, &r);
    out.push(grad_check("batch_norm_eval/input", |p| dot(&layer.forward(&store, &with_shape(&x, p), Mode::Eval).unwrap().0, &r), x.data(), gx.data()));
    out.push(check_store(
        "batch_norm_eval/affine",
        &mut store,
        |s| (dot(&layer.forward(s, &x, Mode::Eval).unwrap().0, &r), 0),
        |s| {
            layer.backward(s, &cache, &r);
        },
    ));

    // losses
    let logits = uniform(&[4, 5], &mut rng);
    let targets = [0usize, 3, 4, 1];
    let (_, g) = cross_entropy(&logits, &targets).unwrap();
    out.push(grad_check("cross_entropy", |p| cross_entropy(&with_shape(&logits, p), &targets).unwrap().0, logits.data(), g.data()));
    let pred = uniform(&[8], &mut rng);
    let target: Vec<f64> = pred.data().iter().zip(off_zero(&[8], &mut rng).data()).map(|(p, d)| p + d).collect();
    let (_, g) = l1(pred.data(), &target).unwrap();
    out.push(grad_check("l1", |p| l1(p, &target).unwrap().0, pred.data(), &g));

    // mlp
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", &[4, 6, 3], &mut rng);
    let x = uniform(&[5, 4], &mut rng);
    let r = uniform(&[5, 3], &mut rng);
    let mlp_loss = |s: &ParamStore, x: &Tensor| {
        let (y, c) = mlp.forward(s, x).unwrap();
        (dot(&y, &r), activation_signature(c.hidden()))
    };
    let (_, cache) = mlp.forward(&store, &x).unwrap();
    store.zero_grad();
    let gx = mlp.backward(&mut store, &cache, &r);
    out.push(grad_check_piecewise("mlp/input", |p| mlp_loss(&store, &with_shape(&x, p)), x.data(), gx.data()));
    out.push(check_store("mlp/params", &mut store, |s| mlp_loss(s, &x), |s| {
        mlp.backward(s, &cache, &r);
    }));

    // the convolution stack in training mode
    let mut store = ParamStore::new();
    let conv = ConvModule::new(&mut store, "conv", 3, 4, 3, &mut rng);
    let x = uniform(&[3, 8, 3], &mut rng);
    let r = uniform(&[3, 6, 4], &mut rng);
    let conv_loss = |s: &ParamStore, x: &Tensor| {
        let (y, c) = conv.forward(s, x, Mode::Train).unwrap();
        (dot(&y, &r), activation_signature(c.activations()))
    };
    let (_, cache) = conv.forward(&store, &x, Mode::Train).unwrap();
    store.zero_grad();
    let gx = conv.backward(&mut store, &cache, &r);
    out.push(grad_check_piecewise("conv_module/input", |p| conv_loss(&store, &with_shape(&x, p)), x.data(), gx.data()));
    out.push(check_store("conv_module/params", &mut store, |s| conv_loss(s, &x), |s| {
        conv.backward(s, &cache, &r);
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kernel_passes() {
        for seed in 0..3 {
            let reports = kernel_audit(seed);
            assert!(reports.len() >= 20);
            for r in &reports {
                assert!(r.passes(1e-4), "{r:?}");
            }
        }
    }

    #[test]
    fn a_broken_backward_is_caught() {
        let mut rng = stream(5, 0);
        let x = uniform(&[4, 3], &mut rng);
        let w = uniform(&[3, 2], &mut rng);
        let r = uniform(&[4, 2], &mut rng);
        let (mut gx, _, _) = linear_backward(&x, &w, &r);
        gx.data_mut()[2] += 1e-2;
        let rep = grad_check("linear/input", |p| dot(&linear(&with_shape(&x, p), &w, None).unwrap(), &r), x.data(), gx.data());
        assert!(!rep.passes(1e-4));
    }
}
