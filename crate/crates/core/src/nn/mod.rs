//! A small differentiable kernel library with hand-written backward passes.
//!
//! Every kernel is a pure function on [`Tensor`]s with a matching
//! `*_backward` function. Layers in [`layers`] bundle kernels with their
//! parameters in a [`ParamStore`] and cache what their backward pass needs.

mod adam;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod audit;
pub mod gradcheck;
pub mod layers;
pub(crate) mod linalg;
pub mod loss;
pub mod norm;
mod params;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{conv1d, conv1d_backward, depthwise_conv1d, depthwise_conv1d_backward};
pub use dense::{dropout, dropout_backward, linear, linear_backward, relu, relu_backward};
pub use gradcheck::{grad_check, grad_check_piecewise, GradReport};
pub use layers::{BatchNorm, ConvModule, Linear, Mlp, Mode};
pub use loss::{cross_entropy, l1, softmax_rows};
pub use norm::{batch_norm_backward, batch_norm_eval, batch_norm_train};
pub use params::{Param, ParamId, ParamStore};
pub use tensor::Tensor;
