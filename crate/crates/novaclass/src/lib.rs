//! Two-stage open-set fault diagnosis for vibration monitoring.
//!
//! Stage one is a wide-first-kernel 1-d convolutional classifier over raw
//! 1024-point vibration windows ([`wdcnn`]), built on a small from-scratch
//! neural-network kernel ([`nn`]). Stage two watches the deployed classifier
//! and decides whether unfamiliar signals are a *new* fault class: feature
//! vectors are embedded with t-SNE ([`tsne`]), clustered with k-means
//! ([`cluster`]), and the knee of the SSE curve votes on the number of
//! distinct signal families ([`novelty`]). When a new class is confirmed and
//! enough samples are collected, the classifier's output layer is widened and
//! the model retrained.
//!
//! All floating-point work is generic over the [`scalar::Real`] scalar so
//! the same code runs in `f32` for production and `f64` where tests need
//! tight numeric agreement. The aliases at the crate root ([`Tensor32`],
//! [`Model64`], …) pin the two concrete instantiations.
//!
//! Everything is deterministic given a seed: random state comes from
//! [`rng::seeded`] and child generators are derived in a fixed order, so a
//! rerun with the same inputs reproduces training, embeddings, and monitor
//! decisions bit for bit on the same target.

pub mod cluster;
pub mod data;
pub mod error;
pub mod nn;
pub mod novelty;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod tsne;
pub mod wdcnn;

pub use error::{Error, Result};

/// `f32` tensor, the production element type.
pub type Tensor32 = tensor::Tensor<f32>;
/// `f64` tensor for high-precision checks.
pub type Tensor64 = tensor::Tensor<f64>;
/// `f32` classifier, the production element type.
pub type Model32 = wdcnn::Model<f32>;
/// `f64` classifier for high-precision checks.
pub type Model64 = wdcnn::Model<f64>;
/// `f32` vibration window.
pub type Window32 = data::Window<f32>;
/// `f64` vibration window.
pub type Window64 = data::Window<f64>;
