use std::path::Path;

use anyhow::{bail, Context, Result};
use crawl_core::graph::{Dataset, Task};
use crawl_core::trainer::TrainConfig;
use serde_json::{json, Value};

use crate::args::{EncodingsArg, Hyper, PoolingArg, ReadoutArg, StrategyArg};
use crate::manifest::MANIFEST_TOOL;

/// Reads a configuration file. A run manifest is accepted too, in which case
/// its resolved configuration is used.
pub fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match value.get("tool").and_then(Value::as_str) {
        Some(MANIFEST_TOOL) => value
            .get("config")
            .cloned()
            .with_context(|| format!("manifest {} has no config", path.display())),
        _ => Ok(value),
    }
}

/// Sets `key` (dotted path) to `value`, creating intermediate objects.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("malformed key {key:?}");
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .with_context(|| format!("{key:?}: {part:?} is not inside an object"))?;
        node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    node.as_object_mut()
        .with_context(|| format!("{key:?} does not address an object field"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`; the value is JSON if it parses, a string otherwise.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .with_context(|| format!("override {text:?} is not KEY=VALUE"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}

fn hyper_overrides(h: &Hyper) -> Vec<(&'static str, Value)> {
    let mut out = Vec::new();
    let mut put = |k: &'static str, v: Option<Value>| {
        if let Some(v) = v {
            out.push((k, v));
        }
    };
    put("model.window", h.s.map(Value::from));
    put("model.layers", h.layers.map(Value::from));
    put("model.hidden", h.d.map(Value::from));
    put("model.conv_width", h.conv_width.map(Value::from));
    put(
        "model.pooling",
        h.pooling.map(|p| match p {
            PoolingArg::Mean => json!("mean"),
            PoolingArg::Sum => json!("sum"),
        }),
    );
    put(
        "model.readout",
        h.readout.map(|r| match r {
            ReadoutArg::Mlp => json!("mlp"),
            ReadoutArg::Linear => json!("linear"),
        }),
    );
    put("model.dropout", h.dropout.map(Value::from));
    put("model.virtual_node", h.vn.map(Value::from));
    put("model.p_star", h.p_star.map(Value::from));
    put("model.strategy", h.strategy.map(strategy_json));
    put(
        "model.encodings",
        h.encodings.map(|e| {
            let (identity, adjacency) = match e {
                EncodingsArg::None => (false, false),
                EncodingsArg::Identity => (true, false),
                EncodingsArg::Adjacency => (false, true),
                EncodingsArg::Both => (true, true),
            };
            json!({ "identity": identity, "adjacency": adjacency })
        }),
    );
    put("model.train_ell", h.ell_train.map(Value::from));
    put("model.eval_ell", h.ell_eval.map(Value::from));
    put("eval_seeds", h.r_test.map(Value::from));
    put("lr", h.lr.map(Value::from));
    put("patience", h.patience.map(Value::from));
    put("batch_size", h.batch_size.map(Value::from));
    put("max_epochs", h.max_epochs.map(Value::from));
    out
}

pub fn strategy_json(s: StrategyArg) -> Value {
    match s {
        StrategyArg::Uniform => json!("uniform"),
        StrategyArg::Nb => json!("non_backtracking"),
    }
}

/// Data-dependent model widths: raw node and edge feature widths and the
/// number of outputs.
fn data_overrides(ds: &Dataset) -> Vec<(&'static str, Value)> {
    let first = &ds.graphs()[0];
    let outputs = match ds.task() {
        Task::Classification { num_classes } => num_classes,
        Task::Regression => 1,
    };
    vec![
        ("model.node_dim", first.model_node_features().dim().into()),
        ("model.edge_dim", first.edge_features().map_or(0, |f| f.dim()).into()),
        ("model.outputs", outputs.into()),
    ]
}

/// Layers, lowest precedence first: defaults, the file, the dataset's
/// widths, named flags, `--set` overrides, the global seed.
pub fn resolve(
    file: Option<&Path>,
    ds: &Dataset,
    hyper: &Hyper,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<TrainConfig> {
    let mut value = serde_json::to_value(TrainConfig::default())?;
    if let Some(path) = file {
        merge(&mut value, read_config(path)?);
    }
    for (k, v) in data_overrides(ds).into_iter().chain(hyper_overrides(hyper)) {
        set_path(&mut value, k, v)?;
    }
    for o in overrides {
        let (k, v) = parse_override(o)?;
        set_path(&mut value, &k, v)?;
    }
    if let Some(s) = seed {
        set_path(&mut value, "seed", s.into())?;
    }
    let cfg: TrainConfig = serde_json::from_value(value).context("invalid training configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

/// Recursive merge of `patch` into `base`: objects merge key by key, other
/// values replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}
