//! End-to-end finite-difference checks of the composed model.

use rand::Rng;

use super::pool::{center_counts, pool_centers, pool_centers_backward};
use super::{GraphBatch, Model, ModelConfig, Pooling, Readout};
use crate::error::Result;
use crate::graph::{make_cycle, Features, Graph};
use crate::nn::gradcheck::{grad_check, grad_check_piecewise, GradReport};
use crate::nn::{cross_entropy, Mode, Tensor};
use crate::rng::stream;
use crate::walker::{sample_walks, WalkSet, WalkStrategy};
use crate::walkfeat::Encodings;

/// Two layers, width 4, window 2, with node and edge features, dropout and
/// a virtual node: every component of the forward pass is active.
pub fn audit_config() -> ModelConfig {
    ModelConfig {
        layers: 2,
        hidden: 4,
        conv_width: 4,
        window: 2,
        pooling: Pooling::Mean,
        readout: Readout::Mlp,
        dropout: 0.25,
        virtual_node: true,
        encodings: Encodings::BOTH,
        strategy: WalkStrategy::NonBacktracking,
        train_ell: 8,
        eval_ell: 12,
        p_star: 1.0,
        node_dim: 3,
        edge_dim: 2,
        outputs: 3,
    }
}

/// Attaches random node (width 3) and edge (width 2) features.
pub fn featured(g: Graph, seed: u64) -> Graph {
    let mut rng = stream(seed, 0);
    let nf = Features::new(3, (0..g.n_nodes() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape");
    let ef = Features::new(2, (0..g.n_edges() * 2).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape");
    g.with_node_features(nf)
        .and_then(|g| g.with_edge_features(ef))
        .expect("feature rows match")
}

/// Two 6-node graphs (two triangles joined by an edge, and a hexagon) with
/// random node and edge features.
pub fn six_node_graphs() -> Vec<Graph> {
    let a = Graph::new(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]).expect("valid");
    let b = make_cycle(6).expect("valid");
    vec![featured(a, 1), featured(b, 2)]
}

/// Checks all trainable parameters of a freshly initialized model on
/// frozen walks. In eval mode the running statistics are perturbed first so
/// the affine and normalization paths are both exercised.
pub fn check_model(name: &str, cfg: ModelConfig, graphs: &[Graph], walks: &[WalkSet], mode: Mode, seed: u64) -> Result<GradReport> {
    let mut model = Model::new(cfg.clone(), seed)?;
    if mode == Mode::Eval {
        let mut rng = stream(seed, 1);
        for p in model.params_mut().iter_mut().filter(|p| !p.trainable) {
            let var = p.name.ends_with("running_var");
            p.value
                .iter_mut()
                .for_each(|x| *x = if var { rng.gen_range(0.5..2.0) } else { rng.gen_range(-0.5..0.5) });
        }
    }
    let refs: Vec<&Graph> = graphs.iter().collect();
    let batch = GraphBatch::from_walks(&refs, walks, cfg.window, cfg.encodings)?;
    let targets: Vec<usize> = (0..graphs.len()).map(|i| i % cfg.outputs).collect();
    let dropout_seed = seed ^ 17;
    let (out, tape) = model.forward(&batch, mode, dropout_seed)?;
    let (_, g) = cross_entropy(&out, &targets)?;
    model.params_mut().zero_grad();
    model.backward(&batch, &tape, &g);
    let analytic = model.params().flat_grads();
    let x0 = model.params().flat_values();
    let mut probe = model.clone();
    Ok(grad_check_piecewise(
        name,
        |p| {
            probe.params_mut().set_flat_values(p).expect("same layout");
            let (out, tape) = probe.forward(&batch, mode, dropout_seed).expect("forward on audit batch");
            (cross_entropy(&out, &targets).expect("targets fit").0, tape.activation_signature())
        },
        &x0,
        &analytic,
    ))
}

fn pooling_check(seed: u64) -> Result<GradReport> {
    let graphs = six_node_graphs();
    let walks = sample_walks(&graphs[0], WalkStrategy::Uniform, 0.5, 6, seed)?;
    let batch = GraphBatch::from_walks(&[&graphs[0]], &[walks], 2, Encodings::BOTH)?;
    let counts = center_counts(&batch);
    let c = 3;
    let mut rng = stream(seed, 2);
    let x = Tensor::from_fn(&[batch.num_walks(), batch.ell() - 1, c], |_| rng.gen_range(-1.0..1.0));
    let r = Tensor::from_fn(&[batch.n_nodes(), c], |_| rng.gen_range(-1.0..1.0));
    let g = pool_centers_backward(&r, &batch, &counts, c);
    let loss = |p: &[f64]| {
        let t = Tensor::from_vec(x.shape(), p.to_vec()).expect("shape");
        pool_centers(&t, &batch, &counts).data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };
    Ok(grad_check("pool_centers", loss, x.data(), g.data()))
}

/// Gradient checks of the composed two-layer model in training and
/// evaluation mode, a sum-pooling linear-readout variant, and the center
/// pooling step.
pub fn model_gradient_audit(seed: u64) -> Result<Vec<GradReport>> {
    let graphs = six_node_graphs();
    let walks = |base: u64, strategy| -> Result<Vec<WalkSet>> {
        graphs
            .iter()
            .enumerate()
            .map(|(i, g)| sample_walks(g, strategy, 1.0, 8, base + i as u64))
            .collect()
    };
    let nb = WalkStrategy::NonBacktracking;
    let single = ModelConfig {
        pooling: Pooling::Sum,
        readout: Readout::Linear,
        virtual_node: false,
        dropout: 0.0,
        ..audit_config()
    };
    Ok(vec![
        check_model("model/train", audit_config(), &graphs, &walks(seed, nb)?, Mode::Train, seed)?,
        check_model("model/eval", audit_config(), &graphs, &walks(seed + 40, nb)?, Mode::Eval, seed)?,
        check_model(
            "model/sum-pool-linear",
            single,
            &graphs[..1],
            &walks(seed + 5, WalkStrategy::Uniform)?[..1],
            Mode::Train,
            seed,
        )?,
        pooling_check(seed)?,
    ])
}
