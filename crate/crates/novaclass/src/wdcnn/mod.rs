//! The WDCNN classifier: architecture assembly, training, evaluation,
//! feature extraction, and output-layer augmentation.
//!
//! The network follows the wide-first-kernel pattern: a stride-16 kernel of
//! 64 taps compresses the raw 1024-point window and suppresses
//! high-frequency noise, three narrow conv blocks refine the result, and a
//! 64-unit fully connected layer produces the feature vector the open-set
//! stage clusters. A final dense + softmax layer yields class probabilities.
//!
//! Training is plain mini-batch SGD with Adam, batch normalization in
//! training mode, and inverted dropout; everything is driven by one seed and
//! replays bit-for-bit on the same target.

mod checkpoint;
mod eval;
mod model;
mod train;

pub use checkpoint::{load_model, save_model, CHECKPOINT_VERSION};
pub use eval::{
    evaluate, kfold_cross_validate, stratified_folds, ConfusionMatrix, CrossValidationReport,
};
pub use model::{
    augment_output_layer, build_model, ArchitectureConfig, ConvBlock, ConvBlockSpec, Model,
};
pub use train::{gradient_check, train, EpochStats, GradientCheckReport, TrainConfig};
