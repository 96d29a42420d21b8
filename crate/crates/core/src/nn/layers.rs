//! Parameterized layers built from the kernels, with cached backward passes.

use rand::Rng;

use super::conv::{conv1d, conv1d_backward, depthwise_conv1d, depthwise_conv1d_backward};
use super::dense::{linear, linear_backward, relu_backward_inplace, relu_inplace};
use super::norm::{
    batch_norm_backward, batch_norm_eval, batch_norm_eval_backward, batch_norm_train, update_running, BnCache,
    BN_EPS, BN_MOMENTUM,
};
use super::{ParamId, ParamStore, Tensor};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm, dropout active.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let weight = store.add_kaiming(format!("{name}.weight"), &[fan_in, fan_out], fan_in, rng);
        let bias = bias.then(|| store.add(format!("{name}.bias"), &[fan_out], vec![0.0; fan_out], true));
        Self {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        linear(x, &store.tensor(self.weight), self.bias.map(|b| store.value(b)))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, store: &mut ParamStore, x: &Tensor, grad_out: &Tensor) -> Tensor {
        let (gx, gw, gb) = linear_backward(x, &store.tensor(self.weight), grad_out);
        store.accumulate(self.weight, gw.data());
        if let Some(b) = self.bias {
            store.accumulate(b, &gb);
        }
        gx
    }

    pub fn num_params(&self) -> usize {
        self.fan_in * self.fan_out + if self.bias.is_some() { self.fan_out } else { 0 }
    }
}

/// Linear layers with ReLU between them (none after the last).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    // input of every linear layer
    inputs: Vec<Tensor>,
}

impl MlpCache {
    /// Post-activation hidden values, for kink detection.
    pub fn hidden(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.iter().skip(1).map(Tensor::data)
    }
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, widths: &[usize], rng: &mut impl Rng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], true, rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor) -> Result<(Tensor, MlpCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.forward(store, &h)?;
            if i + 1 < self.layers.len() {
                relu_inplace(&mut out);
            }
            inputs.push(h);
            h = out;
        }
        Ok((h, MlpCache { inputs }))
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &MlpCache, grad_out: &Tensor) -> Tensor {
        let mut g = grad_out.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if i + 1 < self.layers.len() {
                relu_backward_inplace(&cache.inputs[i + 1], &mut g);
            }
            g = layer.backward(store, &cache.inputs[i], &g);
        }
        g
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Linear::num_params).sum()
    }
}

/// Per-channel batch norm with affine parameters and running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub channels: usize,
}

#[derive(Debug, Clone)]
pub enum BatchNormCache {
    Train(BnCache),
    /// Normalized input under the running statistics.
    Eval(Tensor),
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), &[channels], vec![1.0; channels], true),
            beta: store.add(format!("{name}.beta"), &[channels], vec![0.0; channels], true),
            running_mean: store.add(format!("{name}.running_mean"), &[channels], vec![0.0; channels], false),
            running_var: store.add(format!("{name}.running_var"), &[channels], vec![1.0; channels], false),
            channels,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Tensor, mode: Mode) -> Result<(Tensor, BatchNormCache)> {
        match mode {
            Mode::Train => {
                let (y, c) = batch_norm_train(x, store.value(self.gamma), store.value(self.beta), BN_EPS)?;
                Ok((y, BatchNormCache::Train(c)))
            }
            Mode::Eval => {
                let c = self.channels;
                let xhat = batch_norm_eval(
                    x,
                    &vec![1.0; c],
                    &vec![0.0; c],
                    store.value(self.running_mean),
                    store.value(self.running_var),
                    BN_EPS,
                )?;
                let mut y = xhat.clone();
                let (gamma, beta) = (store.value(self.gamma), store.value(self.beta));
                for row in y.data_mut().chunks_exact_mut(c) {
                    for ((v, g), b) in row.iter_mut().zip(gamma).zip(beta) {
                        *v = *v * g + b;
                    }
                }
                Ok((y, BatchNormCache::Eval(xhat)))
            }
        }
    }

    pub fn backward(&self, store: &mut ParamStore, cache: &BatchNormCache, grad_out: &Tensor) -> Tensor {
        match cache {
            BatchNormCache::Train(c) => {
                let (gx, gg, gb) = batch_norm_backward(c, store.value(self.gamma), grad_out);
                store.accumulate(self.gamma, &gg);
                store.accumulate(self.beta, &gb);
                gx
            }
            BatchNormCache::Eval(xhat) => {
                let gamma = store.value(self.gamma).to_vec();
                let var = store.value(self.running_var).to_vec();
                let mut gg = vec![0.0; self.channels];
                let mut gb = vec![0.0; self.channels];
                for (r, xr) in grad_out.data().chunks_exact(self.channels).zip(xhat.data().chunks_exact(self.channels)) {
                    for (((a, b), v), x) in gg.iter_mut().zip(gb.iter_mut()).zip(r).zip(xr) {
                        *a += v * x;
                        *b += v;
                    }
                }
                store.accumulate(self.gamma, &gg);
                store.accumulate(self.beta, &gb);
                batch_norm_eval_backward(&gamma, &var, BN_EPS, grad_out)
            }
        }
    }

    /// Folds the batch statistics of a training pass into the running
    /// averages.
    pub fn commit(&self, store: &mut ParamStore, cache: &BatchNormCache) {
        if let BatchNormCache::Train(c) = cache {
            update_running(store.value_mut(self.running_mean), &c.batch_mean, BN_MOMENTUM);
            update_running(store.value_mut(self.running_var), &c.batch_var_unbiased, BN_MOMENTUM);
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.channels
    }
}

/// `Conv1D(c_in, c, 1) → Conv1D_dw(c, c, k) → BatchNorm → ReLU →
/// Conv1D(c, c, 1) → ReLU`, all convolutions without bias.
///
/// The stack has receptive field `k` and `c_in·c + k·c + c²` weights besides
/// the batch-norm affine parameters.
#[derive(Debug, Clone)]
pub struct ConvModule {
    pub pointwise_in: ParamId,
    pub depthwise: ParamId,
    pub bn: BatchNorm,
    pub pointwise_out: ParamId,
    pub c_in: usize,
    pub c: usize,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Option<Tensor>,
    z1: Tensor,
    bn: BatchNormCache,
    a3: Tensor,
    out: Tensor,
}

impl ConvCache {
    pub fn bn(&self) -> &BatchNormCache {
        &self.bn
    }

    /// Post-ReLU activations, for kink detection.
    pub fn activations(&self) -> [&[f64]; 2] {
        [self.a3.data(), self.out.data()]
    }
}

impl ConvModule {
    pub fn new(store: &mut ParamStore, name: &str, c_in: usize, c: usize, k: usize, rng: &mut impl Rng) -> Self {
        Self {
            pointwise_in: store.add_kaiming(format!("{name}.pointwise_in"), &[c_in, c, 1], c_in, rng),
            depthwise: store.add_kaiming(format!("{name}.depthwise"), &[c, k], k, rng),
            bn: BatchNorm::new(store, &format!("{name}.bn"), c),
            pointwise_out: store.add_kaiming(format!("{name}.pointwise_out"), &[c, c, 1], c, rng),
            c_in,
            c,
            k,
        }
    }

    /// Weights excluding the batch-norm affine parameters.
    pub fn num_weights(&self) -> usize {
        self.c_in * self.c + self.k * self.c + self.c * self.c
    }

    /// Full stack on a dense `[m, L, c_in]` input.
    pub fn forward(&self, store: &ParamStore, x: &Tensor, mode: Mode) -> Result<(Tensor, ConvCache)> {
        let z1 = conv1d(x, &store.tensor(self.pointwise_in))?;
        let (out, mut cache) = self.forward_projected(store, z1, mode)?;
        cache.input = Some(x.clone());
        Ok((out, cache))
    }

    /// The stack after the first pointwise convolution, given its output
    /// `[m, L, c]`.
    pub fn forward_projected(&self, store: &ParamStore, z1: Tensor, mode: Mode) -> Result<(Tensor, ConvCache)> {
        let z2 = depthwise_conv1d(&z1, &store.tensor(self.depthwise))?;
        let (mut a3, bn) = self.bn.forward(store, &z2, mode)?;
        relu_inplace(&mut a3);
        let mut out = conv1d(&a3, &store.tensor(self.pointwise_out))?;
        relu_inplace(&mut out);
        Ok((
            out.clone(),
            ConvCache {
                input: None,
                z1,
                bn,
                a3,
                out,
            },
        ))
    }

    /// Accumulates parameter gradients. Returns the gradient with respect to
    /// the dense input, or with respect to the projected input `z1` when the
    /// cache came from [`forward_projected`](Self::forward_projected).
    pub fn backward(&self, store: &mut ParamStore, cache: &ConvCache, grad_out: &Tensor) -> Tensor {
        let mut g4 = grad_out.clone();
        relu_backward_inplace(&cache.out, &mut g4);
        let (mut g3, gw_out) = conv1d_backward(&cache.a3, &store.tensor(self.pointwise_out), &g4);
        store.accumulate(self.pointwise_out, gw_out.data());
        relu_backward_inplace(&cache.a3, &mut g3);
        let g2 = self.bn.backward(store, &cache.bn, &g3);
        let (g1, gw_dw) = depthwise_conv1d_backward(&cache.z1, &store.tensor(self.depthwise), &g2);
        store.accumulate(self.depthwise, gw_dw.data());
        match &cache.input {
            Some(x) => {
                let (gx, gw_in) = conv1d_backward(x, &store.tensor(self.pointwise_in), &g1);
                store.accumulate(self.pointwise_in, gw_in.data());
                gx
            }
            None => g1,
        }
    }
}
