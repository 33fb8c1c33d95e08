//! Minimal neural-network kernel.
//!
//! Forward and backward passes for the layer types the classifier needs
//! (1-d convolution, batch normalization, max pooling, dense, dropout),
//! softmax + cross-entropy loss, the Adam optimizer, and a central-difference
//! gradient oracle for tests.
//!
//! Inference ops are pure given immutable parameters and safe to call from
//! concurrent readers. Training entry points (backward passes, optimizer
//! steps, batch-norm running-stat updates) take `&mut` and require exclusive
//! access.

mod activations;
mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod loss;
mod pool;

pub use activations::{softmax, OneHotLabel, PredictionDistribution};
pub use adam::{adam_step, AdamHyper, AdamState};
pub use batchnorm::{batchnorm_forward, BatchNorm1DLayer, BatchNormCache};
pub use conv::{conv1d_forward, conv1d_output_len, Conv1DLayer, PaddingMode};
pub use dense::{dense_forward, DenseLayer};
pub use dropout::{dropout_apply, DropoutMask};
pub use gradcheck::numeric_gradient;
pub use loss::{cross_entropy, PROB_CLAMP};
pub use pool::{maxpool1d_forward, maxpool1d_output_len};

pub(crate) use activations::{relu_backward_in_place, relu_in_place};
pub(crate) use batchnorm::{batchnorm_backward, batchnorm_forward_train_cached, batchnorm_infer_slice};
pub(crate) use conv::{conv_backward_slice, conv_forward_slice};
pub(crate) use dense::{dense_backward_slice, dense_forward_slice};
pub(crate) use dropout::dropout_backward;
pub(crate) use pool::{maxpool_backward_slice, maxpool_forward_slice};
