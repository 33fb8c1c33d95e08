//! Architecture configuration, model assembly, and inference.

use rand::RngExt;

use crate::data::{normalize_window, Window};
use crate::error::{Error, Result};
use crate::nn::{
    batchnorm_infer_slice, conv1d_output_len, conv_forward_slice, dense_forward_slice,
    maxpool1d_output_len, maxpool_forward_slice, relu_in_place, softmax, BatchNorm1DLayer,
    Conv1DLayer, DenseLayer, PaddingMode, PredictionDistribution,
};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// One convolutional block: conv → batch norm → ReLU → max pool, with an
/// optional dropout on its output during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub kernel_len: usize,
    pub stride: usize,
    pub padding: PaddingMode,
    pub pool_size: usize,
    pub pool_stride: usize,
    /// Dropout applied after the pool in training; 0 disables it.
    pub dropout_rate: f64,
}

/// Everything that fixes the network's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureConfig {
    pub input_length: usize,
    pub conv_blocks: Vec<ConvBlockSpec>,
    pub feature_units: usize,
    pub num_classes: usize,
    /// Dropout on the feature layer during training.
    pub dropout_rate: f64,
}

impl ArchitectureConfig {
    /// The default wide-first-kernel stack for 1024-point windows:
    /// Conv(16, k64, s16, same) → Conv(32, k3) → Conv(64, k3) →
    /// Conv(64, k3, valid), each followed by BN + ReLU + Pool(2,2), then
    /// Dense(64) + ReLU + Dropout(0.5) and the classifier head.
    pub fn default_for_classes(num_classes: usize) -> Self {
        let block = |out_channels, kernel_len, stride, padding| ConvBlockSpec {
            out_channels,
            kernel_len,
            stride,
            padding,
            pool_size: 2,
            pool_stride: 2,
            dropout_rate: 0.0,
        };
        ArchitectureConfig {
            input_length: 1024,
            conv_blocks: vec![
                block(16, 64, 16, PaddingMode::Same),
                block(32, 3, 1, PaddingMode::Same),
                block(64, 3, 1, PaddingMode::Same),
                block(64, 3, 1, PaddingMode::Valid),
            ],
            feature_units: 64,
            num_classes,
            dropout_rate: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_length == 0 {
            return Err(Error::invalid_config("input_length must be positive"));
        }
        if self.conv_blocks.is_empty() {
            return Err(Error::invalid_config("at least one conv block required"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid_config(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            )));
        }
        if self.feature_units == 0 {
            return Err(Error::invalid_config("feature_units must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid_config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        let first_kernel = self.conv_blocks[0].kernel_len;
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel_len == 0 || b.stride == 0 {
                return Err(Error::invalid_config(format!(
                    "block {i}: channels, kernel length, and stride must be positive"
                )));
            }
            if b.pool_size == 0 || b.pool_stride == 0 {
                return Err(Error::invalid_config(format!(
                    "block {i}: pool size and stride must be positive"
                )));
            }
            if !(0.0..1.0).contains(&b.dropout_rate) {
                return Err(Error::invalid_config(format!(
                    "block {i}: dropout_rate must be in [0, 1)"
                )));
            }
            if i > 0 && b.kernel_len >= first_kernel {
                return Err(Error::invalid_config(format!(
                    "block {i} kernel length {} must be strictly smaller than the first block's {first_kernel} (wide-first-kernel property)",
                    b.kernel_len
                )));
            }
        }
        self.shape_chain()?;
        Ok(())
    }

    /// `(channels, length)` after every conv block, checking that each conv
    /// and pool fits the signal it receives.
    pub fn shape_chain(&self) -> Result<Vec<(usize, usize)>> {
        let mut chain = Vec::with_capacity(self.conv_blocks.len());
        let mut len = self.input_length;
        for (i, b) in self.conv_blocks.iter().enumerate() {
            let conv_len = conv1d_output_len(len, b.kernel_len, b.stride, b.padding)
                .map_err(|e| Error::invalid_config(format!("block {i} conv: {e}")))?;
            let pool_len = maxpool1d_output_len(conv_len, b.pool_size, b.pool_stride)
                .map_err(|e| Error::invalid_config(format!("block {i} pool: {e}")))?;
            chain.push((b.out_channels, pool_len));
            len = pool_len;
        }
        Ok(chain)
    }

    /// Flattened width feeding the feature layer.
    pub fn flattened_len(&self) -> Result<usize> {
        let chain = self.shape_chain()?;
        let &(channels, len) = chain.last().unwrap();
        Ok(channels * len)
    }
}

/// Parameters of one conv block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<F> {
    pub conv: Conv1DLayer<F>,
    pub bn: BatchNorm1DLayer<F>,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dropout_rate: f64,
}

/// A WDCNN classifier: conv blocks, the 64-unit feature layer, and the
/// softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: ArchitectureConfig,
    pub blocks: Vec<ConvBlock<F>>,
    pub feature_layer: DenseLayer<F>,
    pub output_layer: DenseLayer<F>,
    pub class_names: Vec<String>,
}

impl<F: Real> Model<F> {
    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    pub fn feature_units(&self) -> usize {
        self.config.feature_units
    }

    /// Count of trainable parameters (conv kernels and biases, batch-norm
    /// scale and shift, dense weights and biases; running statistics are
    /// state, not parameters).
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        for b in &self.blocks {
            n += b.conv.kernels.len() + b.conv.bias.len();
            n += b.bn.gamma.len() + b.bn.beta.len();
        }
        n += self.feature_layer.weights.len() + self.feature_layer.bias.len();
        n += self.output_layer.weights.len() + self.output_layer.bias.len();
        n
    }

    /// Class probabilities for one window. The window is normalized
    /// internally (idempotent), batch norm runs on running statistics, and
    /// dropout is disabled.
    pub fn predict(&self, window: &Window<F>) -> Result<PredictionDistribution<F>> {
        let x = self.ingest(window)?;
        let (_, logits) = forward_infer(self, &x);
        softmax(&logits)
    }

    /// The 64-d feature vector: post-ReLU activations of the feature layer.
    pub fn extract_features(&self, window: &Window<F>) -> Result<Vec<F>> {
        let x = self.ingest(window)?;
        let (features, _) = forward_infer(self, &x);
        Ok(features)
    }

    fn ingest(&self, window: &Window<F>) -> Result<Vec<F>> {
        if window.samples().len() != self.config.input_length {
            return Err(Error::invalid_argument(format!(
                "window has {} samples, model expects {}",
                window.samples().len(),
                self.config.input_length
            )));
        }
        Ok(normalize_window(window).samples().to_vec())
    }
}

/// Inference pass over one normalized window; returns (features, logits).
pub(crate) fn forward_infer<F: Real>(model: &Model<F>, x: &[F]) -> (Vec<F>, Vec<F>) {
    debug_assert_eq!(x.len(), model.config.input_length);
    let mut cur = x.to_vec();
    let mut len = model.config.input_length;
    for block in &model.blocks {
        let c_out = block.conv.out_channels();
        let conv_len =
            conv1d_output_len(len, block.conv.kernel_len(), block.conv.stride, block.conv.padding)
                .expect("shape chain validated at build time");
        let mut conv_out = vec![F::zero(); c_out * conv_len];
        conv_forward_slice(&cur, len, &block.conv, &mut conv_out, conv_len);

        let mut bn_out = vec![F::zero(); conv_out.len()];
        batchnorm_infer_slice(&conv_out, 1, c_out, conv_len, &block.bn, &mut bn_out);
        relu_in_place(&mut bn_out);

        let pool_len = maxpool1d_output_len(conv_len, block.pool_size, block.pool_stride)
            .expect("shape chain validated at build time");
        let mut pooled = vec![F::zero(); c_out * pool_len];
        let mut argmax = vec![0usize; pooled.len()];
        maxpool_forward_slice(
            &bn_out, conv_len, c_out, block.pool_size, block.pool_stride, &mut pooled, pool_len,
            &mut argmax,
        );
        cur = pooled;
        len = pool_len;
    }

    let mut features = vec![F::zero(); model.feature_layer.out_features()];
    dense_forward_slice(&cur, &model.feature_layer, &mut features);
    relu_in_place(&mut features);

    let mut logits = vec![F::zero(); model.output_layer.out_features()];
    dense_forward_slice(&features, &model.output_layer, &mut logits);
    (features, logits)
}

/// Builds a model with He-uniform weight initialization
/// (`U(±sqrt(6 / fan_in))`), zero biases, and identity batch-norm scale,
/// deterministically from `seed`.
pub fn build_model<F: Real>(config: &ArchitectureConfig, seed: u64) -> Result<Model<F>> {
    config.validate()?;
    let mut rng = seeded(seed);
    let mut blocks = Vec::with_capacity(config.conv_blocks.len());
    let mut in_channels = 1;
    for spec in &config.conv_blocks {
        let fan_in = in_channels * spec.kernel_len;
        let kernels = Tensor::new(
            vec![spec.out_channels, in_channels, spec.kernel_len],
            he_uniform(spec.out_channels * fan_in, fan_in, &mut rng),
        )?;
        let conv = Conv1DLayer::new(
            kernels,
            vec![F::zero(); spec.out_channels],
            spec.stride,
            spec.padding,
        )?;
        let bn = BatchNorm1DLayer::new(spec.out_channels)?;
        blocks.push(ConvBlock {
            conv,
            bn,
            pool_size: spec.pool_size,
            pool_stride: spec.pool_stride,
            dropout_rate: spec.dropout_rate,
        });
        in_channels = spec.out_channels;
    }

    let flat = config.flattened_len()?;
    let feature_layer = DenseLayer::new(
        Tensor::new(
            vec![config.feature_units, flat],
            he_uniform(config.feature_units * flat, flat, &mut rng),
        )?,
        vec![F::zero(); config.feature_units],
    )?;
    let output_layer = DenseLayer::new(
        Tensor::new(
            vec![config.num_classes, config.feature_units],
            he_uniform(
                config.num_classes * config.feature_units,
                config.feature_units,
                &mut rng,
            ),
        )?,
        vec![F::zero(); config.num_classes],
    )?;

    let class_names = (0..config.num_classes).map(|i| format!("class_{i}")).collect();
    Ok(Model {
        config: config.clone(),
        blocks,
        feature_layer,
        output_layer,
        class_names,
    })
}

fn he_uniform<F: Real>(count: usize, fan_in: usize, rng: &mut SeededRng) -> Vec<F> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..count)
        .map(|_| F::of((rng.random::<f64>() * 2.0 - 1.0) * limit))
        .collect()
}

/// Widens the classifier head by one class. Every existing parameter is
/// copied bitwise; the new output row gets zero weights and a bias equal to
/// the minimum existing output bias, so the new class never wins a
/// prediction before retraining.
pub fn augment_output_layer<F: Real>(model: &Model<F>) -> Model<F> {
    let old = &model.output_layer;
    let (classes, features) = (old.out_features(), old.in_features());
    let mut weights = Vec::with_capacity((classes + 1) * features);
    weights.extend_from_slice(old.weights.data());
    weights.extend(std::iter::repeat_n(F::zero(), features));
    let mut bias = old.bias.clone();
    let min_bias = bias.iter().cloned().fold(F::infinity(), F::min);
    bias.push(min_bias);

    let mut config = model.config.clone();
    config.num_classes += 1;
    let mut class_names = model.class_names.clone();
    class_names.push(format!("class_{classes}"));

    Model {
        config,
        blocks: model.blocks.clone(),
        feature_layer: model.feature_layer.clone(),
        output_layer: DenseLayer::new(
            Tensor::new(vec![classes + 1, features], weights).expect("shape arithmetic"),
            bias,
        )
        .expect("bias length matches"),
        class_names,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_class_specs, generate_synthetic_dataset};

    #[test]
    fn default_config_shape_chain() {
        let cfg = ArchitectureConfig::default_for_classes(5);
        cfg.validate().unwrap();
        // 1024 -(conv s16)-> 64 -(pool)-> 32 -> 32 -> 16 -> 16 -> 8 -> 6 -> 3
        assert_eq!(
            cfg.shape_chain().unwrap(),
            vec![(16, 32), (32, 16), (64, 8), (64, 3)]
        );
        assert_eq!(cfg.flattened_len().unwrap(), 192);
    }

    #[test]
    fn default_model_widths() {
        let model: Model<f32> =
            build_model(&ArchitectureConfig::default_for_classes(5), 1).unwrap();
        assert_eq!(model.output_layer.out_features(), 5);
        assert_eq!(model.feature_layer.out_features(), 64);
        let six: Model<f32> = build_model(&ArchitectureConfig::default_for_classes(6), 1).unwrap();
        assert_eq!(six.output_layer.out_features(), 6);
    }

    #[test]
    fn parameter_count_matches_independent_shape_walk() {
        let cfg = ArchitectureConfig::default_for_classes(5);
        let model: Model<f32> = build_model(&cfg, 1).unwrap();

        // Independent walk: track (channels, length) through the chain and
        // sum each layer's parameters from first principles.
        let mut expected = 0usize;
        let mut channels = 1usize;
        let mut len = cfg.input_length;
        for b in &cfg.conv_blocks {
            expected += b.out_channels * channels * b.kernel_len + b.out_channels; // conv
            expected += 2 * b.out_channels; // bn gamma + beta
            len = match b.padding {
                PaddingMode::Same => len.div_ceil(b.stride),
                PaddingMode::Valid => (len - b.kernel_len) / b.stride + 1,
            };
            len = (len - b.pool_size) / b.pool_stride + 1;
            channels = b.out_channels;
        }
        expected += cfg.feature_units * (channels * len) + cfg.feature_units;
        expected += cfg.num_classes * cfg.feature_units + cfg.num_classes;

        assert_eq!(model.param_count(), expected);
        assert_eq!(model.param_count(), 34_197);
    }

    #[test]
    fn narrow_first_kernel_rejected() {
        let mut cfg = ArchitectureConfig::default_for_classes(5);
        cfg.conv_blocks[0].kernel_len = 3;
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn shape_underflow_is_invalid_config() {
        let mut cfg = ArchitectureConfig::default_for_classes(5);
        cfg.input_length = 32; // first conv (k=64, valid pool chain) cannot fit
        cfg.conv_blocks[0].padding = PaddingMode::Valid;
        assert!(matches!(
            build_model::<f32>(&cfg, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn same_seed_same_model() {
        let cfg = ArchitectureConfig::default_for_classes(5);
        let a: Model<f32> = build_model(&cfg, 9).unwrap();
        let b: Model<f32> = build_model(&cfg, 9).unwrap();
        assert_eq!(a, b);
        let c: Model<f32> = build_model(&cfg, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn predict_is_a_distribution_and_deterministic() {
        let model: Model<f64> =
            build_model(&ArchitectureConfig::default_for_classes(5), 3).unwrap();
        let specs = default_class_specs();
        let ds = generate_synthetic_dataset::<f64>(&specs, &[1, 1, 1, 1, 1, 1], 5).unwrap();
        let w = &ds.windows()[0];
        let a = model.predict(w).unwrap();
        let b = model.predict(w).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(a.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn features_are_64d_and_deterministic() {
        let model: Model<f32> =
            build_model(&ArchitectureConfig::default_for_classes(5), 3).unwrap();
        let specs = default_class_specs();
        let ds = generate_synthetic_dataset::<f32>(&specs, &[1, 1, 1, 1, 1, 1], 5).unwrap();
        let f1 = model.extract_features(&ds.windows()[2]).unwrap();
        let f2 = model.extract_features(&ds.windows()[2]).unwrap();
        assert_eq!(f1.len(), 64);
        assert_eq!(f1, f2);
        assert!(f1.iter().all(|&v| v >= 0.0), "features are post-ReLU");
    }

    #[test]
    fn augment_copies_and_appends() {
        let model: Model<f32> =
            build_model(&ArchitectureConfig::default_for_classes(5), 7).unwrap();
        let wide = augment_output_layer(&model);
        assert_eq!(wide.num_classes(), 6);
        assert_eq!(wide.class_names.len(), 6);
        // old rows bitwise identical
        let old_w = model.output_layer.weights.data();
        let new_w = wide.output_layer.weights.data();
        assert_eq!(&new_w[..old_w.len()], old_w);
        assert!(new_w[old_w.len()..].iter().all(|&v| v == 0.0));
        assert_eq!(&wide.output_layer.bias[..5], &model.output_layer.bias[..]);
        let min = model
            .output_layer
            .bias
            .iter()
            .cloned()
            .fold(f32::INFINITY, f32::min);
        assert_eq!(wide.output_layer.bias[5], min);
        // feature extractor untouched
        assert_eq!(wide.feature_layer, model.feature_layer);
        assert_eq!(wide.blocks, model.blocks);
    }

    #[test]
    fn augmented_model_renormalizes_to_old_distribution() {
        let model: Model<f64> =
            build_model(&ArchitectureConfig::default_for_classes(5), 11).unwrap();
        let wide = augment_output_layer(&model);
        let specs = default_class_specs();
        let ds = generate_synthetic_dataset::<f64>(&specs, &[1, 1, 1, 1, 1, 1], 6).unwrap();
        for w in ds.windows() {
            let old = model.predict(w).unwrap();
            let new = wide.predict(w).unwrap();
            let head: f64 = new.probs()[..5].iter().sum();
            for (o, n) in old.probs().iter().zip(&new.probs()[..5]) {
                assert!((o - n / head).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn wrong_window_length_rejected() {
        let mut cfg = ArchitectureConfig::default_for_classes(5);
        cfg.input_length = 512;
        let model: Model<f32> = build_model(&cfg, 1).unwrap();
        let w = Window::new(vec![0.5f32; 1024]).unwrap();
        assert!(matches!(
            model.predict(&w),
            Err(Error::InvalidArgument(_))
        ));
    }
}
