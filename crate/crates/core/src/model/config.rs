use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walker::WalkStrategy;
use crate::walkfeat::{feature_width, Encodings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    /// One hidden layer of width `d`.
    Mlp,
    Linear,
}

/// Architecture and walk hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of walk-CNN layers.
    pub layers: usize,
    /// Node embedding width `d`.
    pub hidden: usize,
    /// Channel width of the convolution stack.
    pub conv_width: usize,
    /// Window size `s`; the CNN kernel is `s + 1`.
    pub window: usize,
    pub pooling: Pooling,
    pub readout: Readout,
    /// Dropout after global pooling.
    pub dropout: f64,
    pub virtual_node: bool,
    pub encodings: Encodings,
    pub strategy: WalkStrategy,
    pub train_ell: usize,
    pub eval_ell: usize,
    pub p_star: f64,
    /// Raw node feature width `d_V` (1 for unlabeled graphs).
    pub node_dim: usize,
    /// Raw edge feature width `d_E` (0 without edge features).
    pub edge_dim: usize,
    /// Number of classes, or 1 for regression.
    pub outputs: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            hidden: 32,
            conv_width: 32,
            window: 8,
            pooling: Pooling::Mean,
            readout: Readout::Mlp,
            dropout: 0.0,
            virtual_node: false,
            encodings: Encodings::BOTH,
            strategy: WalkStrategy::NonBacktracking,
            train_ell: 50,
            eval_ell: 150,
            p_star: 1.0,
            node_dim: 1,
            edge_dim: 0,
            outputs: 10,
        }
    }
}

impl ModelConfig {
    pub fn kernel_size(&self) -> usize {
        self.window + 1
    }

    /// Input width of each convolution stack.
    pub fn walk_feature_width(&self) -> usize {
        feature_width(self.hidden, self.edge_dim, self.window, self.encodings)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("model config: {m}")));
        if !self.window.is_multiple_of(2) {
            return bad("window size must be even");
        }
        if self.layers == 0 || self.hidden == 0 || self.conv_width == 0 || self.node_dim == 0 || self.outputs == 0 {
            return bad("layers, widths and outputs must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.p_star > 0.0 && self.p_star <= 1.0) {
            return bad("p_star must lie in (0, 1]");
        }
        if self.train_ell < self.window || self.eval_ell < self.window {
            return bad("walks must have at least s + 1 nodes");
        }
        Ok(())
    }

    /// Exact number of trainable parameters of the model this config
    /// builds.
    pub fn count_parameters(&self) -> usize {
        let d = self.hidden;
        let c = self.conv_width;
        let input = self.node_dim * d + d;
        let conv = self.walk_feature_width() * c + self.kernel_size() * c + c * c;
        let conv_bn = 2 * c;
        let update = c * 2 * d + 2 * d + 2 * d * d + d;
        let vn = if self.virtual_node { (self.layers - 1) * (2 * d * d + 2 * d) } else { 0 };
        let final_bn = 2 * d;
        let readout = match self.readout {
            Readout::Mlp => d * d + d + d * self.outputs + self.outputs,
            Readout::Linear => d * self.outputs + self.outputs,
        };
        input + self.layers * (conv + conv_bn + update) + vn + final_bn + readout
    }

    /// Weights of one convolution stack, excluding batch-norm affine
    /// parameters.
    pub fn conv_module_weights(&self) -> usize {
        let c = self.conv_width;
        self.walk_feature_width() * c + self.kernel_size() * c + c * c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_fits_small_budget() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert!(cfg.count_parameters() < 100_000);
        assert_eq!(cfg.kernel_size(), 9);
    }

    #[test]
    fn odd_window_rejected() {
        let cfg = ModelConfig {
            window: 3,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn layer_params_are_additive() {
        let one = ModelConfig {
            layers: 2,
            ..ModelConfig::default()
        };
        let two = ModelConfig {
            layers: 4,
            ..ModelConfig::default()
        };
        let base = ModelConfig {
            layers: 0,
            ..ModelConfig::default()
        }
        .count_parameters();
        assert_eq!(two.count_parameters() - base, 2 * (one.count_parameters() - base));
    }
}
