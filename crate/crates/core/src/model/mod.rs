//! The walk-CNN graph model: stacked layers that convolve over walk feature
//! matrices, pool walklet centers back into nodes and update node states
//! residually, followed by global pooling and a readout head.

pub mod audit;
mod batch;
mod config;
pub mod pool;

use std::path::Path;

pub use batch::GraphBatch;
pub use config::{ModelConfig, Pooling, Readout};

use self::batch::NO_EDGE;
use self::pool::{center_counts, pool_centers, pool_centers_backward};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{load_checkpoint_into, read_manifest, save_checkpoint, Dtype};
use crate::nn::gradcheck::activation_signature;
use crate::nn::layers::{BatchNormCache, ConvCache, MlpCache};
use crate::nn::{
    dropout, dropout_backward, linear, linear_backward, relu_backward, BatchNorm, ConvModule, Linear, Mlp, Mode,
    ParamStore, Tensor,
};
use crate::rng;

/// One walk-CNN layer: convolution stack plus node update MLP.
#[derive(Debug, Clone)]
pub struct CrawlLayer {
    pub conv: ConvModule,
    pub update: Mlp,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    store: ParamStore,
    input: Linear,
    layers: Vec<CrawlLayer>,
    virtual_nodes: Vec<Mlp>,
    final_bn: BatchNorm,
    readout: Mlp,
}

#[derive(Debug, Clone)]
struct LayerTape {
    conv: ConvCache,
    update: MlpCache,
}

#[derive(Debug, Clone)]
struct VnTape {
    mlp: MlpCache,
}

/// Everything a backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    counts: Vec<u32>,
    /// Input of every layer (after the virtual node, if any).
    states: Vec<Tensor>,
    layers: Vec<LayerTape>,
    vn: Vec<VnTape>,
    final_bn: BatchNormCache,
    activated: Tensor,
    dropout_mask: Option<Vec<f64>>,
    readout: MlpCache,
}

impl Tape {
    /// Hash of every ReLU pattern in the pass.
    pub fn activation_signature(&self) -> u64 {
        let mut parts: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            parts.extend(l.conv.activations());
            parts.extend(l.update.hidden());
        }
        for v in &self.vn {
            parts.extend(v.mlp.hidden());
        }
        parts.push(self.activated.data());
        parts.extend(self.readout.hidden());
        activation_signature(parts)
    }
}

fn widths(from: usize, hidden: usize, to: usize, with_hidden: bool) -> Vec<usize> {
    if with_hidden {
        vec![from, hidden, to]
    } else {
        vec![from, to]
    }
}

impl Model {
    /// Builds a freshly initialized model.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(rng::derive_seed(seed, "init"), 0);
        let mut store = ParamStore::new();
        let d = config.hidden;
        let c = config.conv_width;
        let input = Linear::new(&mut store, "input", config.node_dim, d, true, &mut rng);
        let layers = (0..config.layers)
            .map(|t| CrawlLayer {
                conv: ConvModule::new(
                    &mut store,
                    &format!("layer{t}.conv"),
                    config.walk_feature_width(),
                    c,
                    config.kernel_size(),
                    &mut rng,
                ),
                update: Mlp::new(&mut store, &format!("layer{t}.update"), &[c, 2 * d, d], &mut rng),
            })
            .collect();
        let virtual_nodes = if config.virtual_node {
            (0..config.layers - 1)
                .map(|t| Mlp::new(&mut store, &format!("vn{t}"), &[d, d, d], &mut rng))
                .collect()
        } else {
            Vec::new()
        };
        let final_bn = BatchNorm::new(&mut store, "final_bn", d);
        let readout = Mlp::new(
            &mut store,
            "readout",
            &widths(d, d, config.outputs, config.readout == Readout::Mlp),
            &mut rng,
        );
        Ok(Self {
            config,
            store,
            input,
            layers,
            virtual_nodes,
            final_bn,
            readout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn layers(&self) -> &[CrawlLayer] {
        &self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_trainable()
    }

    /// Samples walks for `graphs` with this model's strategy, window and
    /// encodings.
    pub fn batch(&self, graphs: &[&crate::graph::Graph], ell: usize, seeds: &[u64]) -> Result<GraphBatch> {
        GraphBatch::sample(
            graphs,
            self.config.strategy,
            self.config.p_star,
            ell,
            seeds,
            self.config.window,
            self.config.encodings,
        )
    }

    fn check_batch(&self, batch: &GraphBatch) -> Result<()> {
        if batch.window != self.config.window {
            return Err(Error::invalid("batch was built for a different window size"));
        }
        if batch.node_features.channels() != self.config.node_dim {
            return Err(Error::invalid(format!(
                "model expects {} node feature columns, batch has {}",
                self.config.node_dim,
                batch.node_features.channels()
            )));
        }
        let edge_dim = batch.edge_features.as_ref().map_or(0, Tensor::channels);
        if edge_dim != self.config.edge_dim {
            return Err(Error::invalid(format!(
                "model expects {} edge feature columns, batch has {edge_dim}",
                self.config.edge_dim
            )));
        }
        Ok(())
    }

    /// Node states after the input projection.
    pub fn embed_nodes(&self, batch: &GraphBatch) -> Result<Tensor> {
        self.check_batch(batch)?;
        self.input.forward(&self.store, &batch.node_features)
    }

    /// Splits the first pointwise kernel `[d_X, c]` into node, edge and
    /// structural row blocks.
    fn projection_blocks(&self, layer: &CrawlLayer) -> (Tensor, Option<Tensor>, &[f64]) {
        let (d, de, c) = (self.config.hidden, self.config.edge_dim, self.config.conv_width);
        let w = self.store.value(layer.conv.pointwise_in);
        let node = Tensor::from_vec(&[d, c], w[..d * c].to_vec()).expect("node block");
        let edge = (de > 0).then(|| Tensor::from_vec(&[de, c], w[d * c..(d + de) * c].to_vec()).expect("edge block"));
        (node, edge, &w[(d + de) * c..])
    }

    /// First pointwise convolution of the walk feature tensor, computed
    /// without materializing the tensor: node and edge rows are projected
    /// once per node and edge and gathered, structural rows add the weight
    /// rows of their set bits.
    fn project(&self, layer: &CrawlLayer, batch: &GraphBatch, h: &Tensor) -> Result<Tensor> {
        let c = self.config.conv_width;
        let (w_node, w_edge, w_struct) = self.projection_blocks(layer);
        let node_proj = linear(h, &w_node, None)?;
        let edge_proj = match (&w_edge, &batch.edge_features) {
            (Some(w), Some(f)) => Some(linear(f, w, None)?),
            _ => None,
        };
        let rows = batch.row_node.len();
        let mut z = vec![0.0; rows * c];
        let np = node_proj.data();
        for (r, out) in z.chunks_exact_mut(c).enumerate() {
            let v = batch.row_node[r] as usize;
            out.copy_from_slice(&np[v * c..(v + 1) * c]);
            if let Some(ep) = &edge_proj {
                let e = batch.row_edge[r];
                if e != NO_EDGE {
                    let e = e as usize;
                    for (o, x) in out.iter_mut().zip(&ep.data()[e * c..(e + 1) * c]) {
                        *o += x;
                    }
                }
            }
            for &col in batch.row_bits(r) {
                let col = col as usize;
                for (o, x) in out.iter_mut().zip(&w_struct[col * c..(col + 1) * c]) {
                    *o += x;
                }
            }
        }
        Tensor::from_vec(&[batch.num_walks, batch.ell + 1, c], z)
    }

    /// Gradient of [`project`](Self::project): accumulates into the
    /// pointwise kernel and returns the gradient with respect to `h`.
    fn project_backward(&mut self, t: usize, batch: &GraphBatch, h: &Tensor, g1: &Tensor) -> Tensor {
        let (d, de, c) = (self.config.hidden, self.config.edge_dim, self.config.conv_width);
        let width = self.config.walk_feature_width();
        let mut g_node = vec![0.0; batch.n_nodes * c];
        let n_edges = batch.edge_features.as_ref().map_or(0, |f| f.shape()[0]);
        let mut g_edge = vec![0.0; n_edges * c];
        let mut gw = vec![0.0; width * c];
        let g_struct = &mut gw[(d + de) * c..];
        for (r, g) in g1.data().chunks_exact(c).enumerate() {
            let v = batch.row_node[r] as usize;
            for (a, x) in g_node[v * c..(v + 1) * c].iter_mut().zip(g) {
                *a += x;
            }
            if de > 0 && batch.row_edge[r] != NO_EDGE {
                let e = batch.row_edge[r] as usize;
                for (a, x) in g_edge[e * c..(e + 1) * c].iter_mut().zip(g) {
                    *a += x;
                }
            }
            for &col in batch.row_bits(r) {
                let col = col as usize;
                for (a, x) in g_struct[col * c..(col + 1) * c].iter_mut().zip(g) {
                    *a += x;
                }
            }
        }
        let layer = &self.layers[t];
        let (w_node, w_edge, _) = self.projection_blocks(layer);
        let g_node = Tensor::from_vec(&[batch.n_nodes, c], g_node).expect("node grad");
        let (gh, gw_node, _) = linear_backward(h, &w_node, &g_node);
        gw[..d * c].copy_from_slice(gw_node.data());
        if let (Some(w), Some(f)) = (w_edge, &batch.edge_features) {
            let g_edge = Tensor::from_vec(&[n_edges, c], g_edge).expect("edge grad");
            let (_, gw_edge, _) = linear_backward(f, &w, &g_edge);
            gw[d * c..(d + de) * c].copy_from_slice(gw_edge.data());
        }
        let id = self.layers[t].conv.pointwise_in;
        self.store.accumulate(id, &gw);
        gh
    }

    fn layer_forward_cached(
        &self,
        t: usize,
        batch: &GraphBatch,
        h: &Tensor,
        counts: &[u32],
        mode: Mode,
    ) -> Result<(Tensor, LayerTape)> {
        let layer = &self.layers[t];
        let z1 = self.project(layer, batch, h)?;
        let (out, conv) = layer.conv.forward_projected(&self.store, z1, mode)?;
        let pooled = pool_centers(&out, batch, counts);
        let (delta, update) = layer.update.forward(&self.store, &pooled)?;
        let mut next = h.clone();
        for (a, b) in next.data_mut().iter_mut().zip(delta.data()) {
            *a += b;
        }
        Ok((next, LayerTape { conv, update }))
    }

    /// Applies layer `t` to node states `h` (`[n, d]`), returning the
    /// updated states `h + U(pool(CNN(X)))`.
    pub fn layer_forward(&self, t: usize, batch: &GraphBatch, h: &Tensor, mode: Mode) -> Result<Tensor> {
        self.check_batch(batch)?;
        if t >= self.layers.len() {
            return Err(Error::invalid(format!("layer {t} out of range")));
        }
        let counts = center_counts(batch);
        Ok(self.layer_forward_cached(t, batch, h, &counts, mode)?.0)
    }

    /// Output of the convolution stack of layer `t`, `[m, ell + 1 - s, c]`.
    pub fn conv_output(&self, t: usize, batch: &GraphBatch, h: &Tensor, mode: Mode) -> Result<Tensor> {
        self.check_batch(batch)?;
        let layer = &self.layers[t];
        let z1 = self.project(layer, batch, h)?;
        Ok(layer.conv.forward_projected(&self.store, z1, mode)?.0)
    }

    fn virtual_node_cached(&self, t: usize, batch: &GraphBatch, h: &mut Tensor, vn: &Tensor) -> Result<(Tensor, VnTape)> {
        let d = self.config.hidden;
        let mut input = vn.clone();
        {
            let acc = input.data_mut();
            for (v, row) in h.data().chunks_exact(d).enumerate() {
                let g = batch.graph_of_node[v];
                for (a, x) in acc[g * d..(g + 1) * d].iter_mut().zip(row) {
                    *a += x;
                }
            }
        }
        let (state, mlp) = self.virtual_nodes[t].forward(&self.store, &input)?;
        for (v, row) in h.data_mut().chunks_exact_mut(d).enumerate() {
            let g = batch.graph_of_node[v];
            for (a, x) in row.iter_mut().zip(&state.data()[g * d..(g + 1) * d]) {
                *a += x;
            }
        }
        Ok((state, VnTape { mlp }))
    }

    /// Virtual node step after layer `t`: the new virtual state is
    /// `U(previous + Σ_v h_v)` per graph and is added to every node.
    /// Returns the updated node states and virtual state (`[graphs, d]`).
    pub fn virtual_node_update(&self, t: usize, batch: &GraphBatch, h: &Tensor, vn: &Tensor) -> Result<(Tensor, Tensor)> {
        if t >= self.virtual_nodes.len() {
            return Err(Error::invalid(format!("no virtual node update after layer {t}")));
        }
        let mut h = h.clone();
        let (state, _) = self.virtual_node_cached(t, batch, &mut h, vn)?;
        Ok((h, state))
    }

    /// Full forward pass. Returns `[graphs, outputs]` logits (or
    /// predictions for regression) and the tape for [`backward`](Self::backward).
    /// `dropout_seed` only matters in training mode.
    pub fn forward(&self, batch: &GraphBatch, mode: Mode, dropout_seed: u64) -> Result<(Tensor, Tape)> {
        let mut h = self.embed_nodes(batch)?;
        let counts = center_counts(batch);
        let d = self.config.hidden;
        let g = batch.n_graphs();
        let mut vn_state = Tensor::zeros(&[g, d]);
        let mut states = Vec::with_capacity(self.layers.len());
        let mut layer_tapes = Vec::with_capacity(self.layers.len());
        let mut vn_tapes = Vec::new();
        for t in 0..self.layers.len() {
            let (mut next, tape) = self.layer_forward_cached(t, batch, &h, &counts, mode)?;
            next.check_finite("layer")?;
            states.push(h);
            layer_tapes.push(tape);
            if t < self.virtual_nodes.len() {
                let (state, tape) = self.virtual_node_cached(t, batch, &mut next, &vn_state)?;
                vn_state = state;
                vn_tapes.push(tape);
            }
            h = next;
        }
        let (mut activated, final_bn) = self.final_bn.forward(&self.store, &h, mode)?;
        activated.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        let mut pooled = Tensor::zeros(&[g, d]);
        {
            let acc = pooled.data_mut();
            for (v, row) in activated.data().chunks_exact(d).enumerate() {
                let gi = batch.graph_of_node[v];
                let scale = self.node_weight(batch, gi);
                for (a, x) in acc[gi * d..(gi + 1) * d].iter_mut().zip(row) {
                    *a += x * scale;
                }
            }
        }
        let (pooled, dropout_mask) = if mode == Mode::Train && self.config.dropout > 0.0 {
            let mut r = rng::stream(dropout_seed, 0);
            let (y, mask) = dropout(&pooled, self.config.dropout, &mut r)?;
            (y, Some(mask))
        } else {
            (pooled, None)
        };
        let (out, readout) = self.readout.forward(&self.store, &pooled)?;
        out.check_finite("readout")?;
        Ok((
            out,
            Tape {
                counts,
                states,
                layers: layer_tapes,
                vn: vn_tapes,
                final_bn,
                activated,
                dropout_mask,
                readout,
            },
        ))
    }

    fn node_weight(&self, batch: &GraphBatch, graph: usize) -> f64 {
        match self.config.pooling {
            Pooling::Mean => 1.0 / batch.nodes_per_graph[graph] as f64,
            Pooling::Sum => 1.0,
        }
    }

    /// Accumulates parameter gradients for `grad_out` (gradient of the loss
    /// with respect to the forward output).
    pub fn backward(&mut self, batch: &GraphBatch, tape: &Tape, grad_out: &Tensor) {
        let d = self.config.hidden;
        let c = self.config.conv_width;
        let readout = self.readout.clone();
        let mut g_pooled = readout.backward(&mut self.store, &tape.readout, grad_out);
        if let Some(mask) = &tape.dropout_mask {
            g_pooled = dropout_backward(mask, &g_pooled);
        }
        let mut g_act = Tensor::zeros(&[batch.n_nodes, d]);
        for (v, row) in g_act.data_mut().chunks_exact_mut(d).enumerate() {
            let gi = batch.graph_of_node[v];
            let scale = self.node_weight(batch, gi);
            for (a, x) in row.iter_mut().zip(&g_pooled.data()[gi * d..(gi + 1) * d]) {
                *a = x * scale;
            }
        }
        let g_bn = relu_backward(&tape.activated, &g_act);
        let final_bn = self.final_bn.clone();
        let mut gh = final_bn.backward(&mut self.store, &tape.final_bn, &g_bn);
        let mut g_vn = Tensor::zeros(&[batch.n_graphs(), d]);
        for t in (0..self.layers.len()).rev() {
            if t < self.virtual_nodes.len() {
                // h̃ = h + vn[g]; vn = U(vn_prev + Σ h)
                for (v, row) in gh.data().chunks_exact(d).enumerate() {
                    let gi = batch.graph_of_node[v];
                    for (a, x) in g_vn.data_mut()[gi * d..(gi + 1) * d].iter_mut().zip(row) {
                        *a += x;
                    }
                }
                let mlp = self.virtual_nodes[t].clone();
                let g_in = mlp.backward(&mut self.store, &tape.vn[t].mlp, &g_vn);
                for (v, row) in gh.data_mut().chunks_exact_mut(d).enumerate() {
                    let gi = batch.graph_of_node[v];
                    for (a, x) in row.iter_mut().zip(&g_in.data()[gi * d..(gi + 1) * d]) {
                        *a += x;
                    }
                }
                g_vn = g_in;
            }
            let layer = self.layers[t].clone();
            let lt = &tape.layers[t];
            let g_pool = layer.update.backward(&mut self.store, &lt.update, &gh);
            let g_out = pool_centers_backward(&g_pool, batch, &tape.counts, c);
            let g1 = layer.conv.backward(&mut self.store, &lt.conv, &g_out);
            let g_prev = self.project_backward(t, batch, &tape.states[t], &g1);
            for (a, b) in gh.data_mut().iter_mut().zip(g_prev.data()) {
                *a += b;
            }
        }
        let input = self.input.clone();
        input.backward(&mut self.store, &batch.node_features, &gh);
    }

    /// Folds the batch-norm statistics of a training pass into the running
    /// averages.
    pub fn commit(&mut self, tape: &Tape) {
        for (layer, lt) in self.layers.iter().zip(&tape.layers) {
            layer.conv.bn.commit(&mut self.store, lt.conv.bn());
        }
        self.final_bn.commit(&mut self.store, &tape.final_bn);
    }

    /// Convenience: eval-mode outputs for a batch.
    pub fn predict(&self, batch: &GraphBatch) -> Result<Tensor> {
        Ok(self.forward(batch, Mode::Eval, 0)?.0)
    }

    pub fn save(&self, dir: &Path, dtype: Dtype) -> Result<()> {
        save_checkpoint(dir, &self.store, serde_json::to_value(&self.config)?, dtype)?;
        Ok(())
    }

    /// Rebuilds a model from a checkpoint directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let config: ModelConfig = serde_json::from_value(manifest.config)?;
        let mut model = Model::new(config, 0)?;
        load_checkpoint_into(dir, &mut model.store)?;
        Ok(model)
    }
}
