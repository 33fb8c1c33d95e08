//! Mini-batch training with Adam, and the batched forward/backward passes.

use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::StandardNormal;

use crate::data::{normalize_window, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, batchnorm_backward, batchnorm_forward_train_cached, conv1d_output_len,
    conv_backward_slice, conv_forward_slice, dense_backward_slice, dense_forward_slice,
    dropout_apply, dropout_backward, maxpool1d_output_len, maxpool_backward_slice,
    maxpool_forward_slice, numeric_gradient, relu_backward_in_place, relu_in_place, softmax,
    AdamHyper, AdamState, BatchNormCache, DropoutMask, PROB_CLAMP,
};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Real;
use crate::wdcnn::model::{build_model, forward_infer, ArchitectureConfig, Model};

/// Knobs for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Fraction of the dataset held out for validation; 0 disables the split
    /// and the final model is returned instead of the best-validation one.
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 64,
            seed: 42,
            adam: AdamHyper::default(),
            patience: Some(5),
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid_config("epochs must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid_config(
                "batch_size must be at least 2 (batch normalization needs batch statistics)",
            ));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::invalid_config(format!(
                "val_fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Loss and accuracy for one epoch, on the training batches and (when a
/// validation split exists) the held-out windows.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

/// Trains the model on a labeled dataset.
///
/// Returns the model from the epoch with the lowest validation loss (the
/// final model when `val_fraction` is 0) and the per-epoch history. The run
/// is a pure function of the model, data, and `cfg.seed`.
pub fn train<F: Real>(
    model: Model<F>,
    dataset: &LabeledDataset<F>,
    cfg: &TrainConfig,
) -> Result<(Model<F>, Vec<EpochStats>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid_argument("training dataset is empty"));
    }
    let num_classes = model.num_classes();
    if let Some(&bad) = dataset.labels().iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid_argument(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    let input_len = model.config.input_length;
    if dataset.windows()[0].samples().len() != input_len {
        return Err(Error::invalid_argument(format!(
            "dataset windows have {} samples, model expects {input_len}",
            dataset.windows()[0].samples().len()
        )));
    }

    // Normalize once up front; ingestion at predict time applies the same
    // idempotent transform.
    let n = dataset.len();
    let mut x = vec![F::zero(); n * input_len];
    for (i, w) in dataset.windows().iter().enumerate() {
        x[i * input_len..(i + 1) * input_len]
            .copy_from_slice(normalize_window(w).samples());
    }
    let labels = dataset.labels();

    let mut master = seeded(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut master);
    let val_count = (n as f64 * cfg.val_fraction).floor() as usize;
    let (val_idx, train_idx) = indices.split_at(val_count);
    let mut train_idx = train_idx.to_vec();
    if train_idx.is_empty() {
        return Err(Error::invalid_argument(
            "validation split leaves no training windows",
        ));
    }

    let mut model = model;
    let mut opt = AdamStates::new(&model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Model<F>)> = None; // (val_loss, epoch, model)

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut master);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        let mut seen = 0usize;

        for batch in train_idx.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue; // batch norm needs at least two samples
            }
            let bn = batch.len();
            let mut bx = vec![F::zero(); bn * input_len];
            for (s, &i) in batch.iter().enumerate() {
                bx[s * input_len..(s + 1) * input_len]
                    .copy_from_slice(&x[i * input_len..(i + 1) * input_len]);
            }
            let blabels: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();

            let pass = forward_train(&mut model, &bx, bn, &mut master)
                .map_err(|_| Error::NumericDivergence { epoch })?;
            for (s, &label) in blabels.iter().enumerate() {
                let p = pass.probs[s * num_classes + label].to_f64();
                loss_sum += -p.max(PROB_CLAMP).ln();
                let row = &pass.probs[s * num_classes..(s + 1) * num_classes];
                if argmax(row) == label {
                    correct += 1;
                }
            }
            seen += bn;

            let mut grads = ParamGrads::zeroed(&model);
            backward_batch(&model, &bx, bn, &blabels, &pass, &mut grads);
            opt.apply(&mut model, &grads, &cfg.adam);
        }

        if seen == 0 {
            return Err(Error::invalid_argument(
                "no batch reached the minimum size of 2; use a smaller batch_size or more data",
            ));
        }
        let train_loss = loss_sum / seen as f64;
        if !train_loss.is_finite() {
            return Err(Error::NumericDivergence { epoch });
        }
        let train_accuracy = correct as f64 / seen as f64;

        let (val_loss, val_accuracy) = if val_count > 0 {
            let (l, a) = score_split(&model, &x, input_len, labels, val_idx);
            if !l.is_finite() {
                return Err(Error::NumericDivergence { epoch });
            }
            (Some(l), Some(a))
        } else {
            (None, None)
        };

        history.push(EpochStats {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        log::debug!(
            "epoch {epoch}: train loss {train_loss:.4} acc {train_accuracy:.4} val {:?} {:?}",
            val_loss,
            val_accuracy
        );

        if let Some(vl) = val_loss {
            let improved = best.as_ref().is_none_or(|(b, _, _)| vl < *b);
            if improved {
                best = Some((vl, epoch, model.clone()));
            } else if let (Some(patience), Some((_, best_epoch, _))) = (cfg.patience, best.as_ref())
            {
                if epoch - best_epoch >= patience {
                    break;
                }
            }
        }
    }

    let final_model = match best {
        Some((_, _, m)) => m,
        None => model,
    };
    Ok((final_model, history))
}

/// Inference-mode loss/accuracy over a set of rows of `x`.
fn score_split<F: Real>(
    model: &Model<F>,
    x: &[F],
    input_len: usize,
    labels: &[usize],
    idx: &[usize],
) -> (f64, f64) {
    let mut loss = 0.0f64;
    let mut correct = 0usize;
    for &i in idx {
        let (_, logits) = forward_infer(model, &x[i * input_len..(i + 1) * input_len]);
        let probs = match softmax(&logits) {
            Ok(p) => p,
            Err(_) => return (f64::NAN, 0.0),
        };
        loss += -probs.probs()[labels[i]].to_f64().max(PROB_CLAMP).ln();
        if probs.argmax() == labels[i] {
            correct += 1;
        }
    }
    (loss / idx.len() as f64, correct as f64 / idx.len() as f64)
}

fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Outcome of [`gradient_check`]: how many coordinates were compared and the
/// worst relative disagreement found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    pub total_params: usize,
    /// Coordinates whose analytic magnitude cleared the comparison floor.
    pub compared: usize,
    pub max_rel_error: f64,
}

/// Validates analytic backpropagation against central finite differences.
///
/// Builds a fresh 64-bit network for `arch` from `seed`, runs one
/// training-mode forward/backward over a batch of `batch` random inputs
/// (labels assigned round-robin), and compares every parameter's analytic
/// gradient with a central-difference estimate at step 1e-5. Dropout masks
/// are drawn from a seed fixed across probes, so the loss stays a
/// deterministic function of the parameters even with dropout enabled.
/// Coordinates with |analytic| ≤ 1e-8 are skipped — relative error is
/// meaningless at zero — and reported via `compared`.
///
/// Cost is two full forward passes per parameter; intended for small
/// architectures (a few thousand parameters at most).
pub fn gradient_check(
    arch: &ArchitectureConfig,
    batch: usize,
    seed: u64,
) -> Result<GradientCheckReport> {
    if batch < 2 {
        return Err(Error::invalid_argument(
            "gradient check needs a batch of at least 2 (batch normalization)",
        ));
    }
    let model = build_model::<f64>(arch, seed)?;
    let mut data_rng = seeded(seed ^ 0xda7a_c0de);
    let x: Vec<f64> = (0..batch * arch.input_length)
        .map(|_| data_rng.sample(StandardNormal))
        .collect();
    let labels: Vec<usize> = (0..batch).map(|i| i % arch.num_classes).collect();
    let mask_seed = seed ^ 0x5eed;

    let mut pass_model = model.clone();
    let pass = forward_train(&mut pass_model, &x, batch, &mut seeded(mask_seed))?;
    let mut grads = ParamGrads::zeroed(&pass_model);
    backward_batch(&pass_model, &x, batch, &labels, &pass, &mut grads);
    let analytic = gather_grads(&grads);
    let params = gather_params(&model);

    let numeric = numeric_gradient(&params, 1e-5, |p| {
        let mut probe = model.clone();
        scatter_params(&mut probe, p);
        let pass = forward_train(&mut probe, &x, batch, &mut seeded(mask_seed))?;
        let classes = probe.config.num_classes;
        let mut loss = 0.0f64;
        for (s, &label) in labels.iter().enumerate() {
            loss += -pass.probs[s * classes + label].max(PROB_CLAMP).ln();
        }
        Ok(loss / batch as f64)
    })?;

    let mut compared = 0usize;
    let mut max_rel_error = 0.0f64;
    for (&a, &g) in analytic.iter().zip(&numeric) {
        if a.abs() <= 1e-8 {
            continue;
        }
        compared += 1;
        let rel = (a - g).abs() / a.abs().max(g.abs());
        max_rel_error = max_rel_error.max(rel);
    }
    Ok(GradientCheckReport {
        total_params: params.len(),
        compared,
        max_rel_error,
    })
}

/// Flattens every trainable tensor in optimizer order.
fn gather_params(model: &Model<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for b in &model.blocks {
        out.extend_from_slice(b.conv.kernels.data());
        out.extend_from_slice(&b.conv.bias);
        out.extend_from_slice(&b.bn.gamma);
        out.extend_from_slice(&b.bn.beta);
    }
    out.extend_from_slice(model.feature_layer.weights.data());
    out.extend_from_slice(&model.feature_layer.bias);
    out.extend_from_slice(model.output_layer.weights.data());
    out.extend_from_slice(&model.output_layer.bias);
    out
}

/// Writes a flat parameter vector back into the model, inverse of
/// [`gather_params`].
fn scatter_params(model: &mut Model<f64>, params: &[f64]) {
    let mut at = 0usize;
    let mut take = |dst: &mut [f64]| {
        dst.copy_from_slice(&params[at..at + dst.len()]);
        at += dst.len();
    };
    for b in &mut model.blocks {
        take(b.conv.kernels.data_mut());
        take(&mut b.conv.bias);
        take(&mut b.bn.gamma);
        take(&mut b.bn.beta);
    }
    take(model.feature_layer.weights.data_mut());
    take(&mut model.feature_layer.bias);
    take(model.output_layer.weights.data_mut());
    take(&mut model.output_layer.bias);
    debug_assert_eq!(at, params.len());
}

/// Flattens gradient accumulators in the same order as [`gather_params`].
fn gather_grads(grads: &ParamGrads<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for b in 0..grads.conv_k.len() {
        out.extend_from_slice(&grads.conv_k[b]);
        out.extend_from_slice(&grads.conv_b[b]);
        out.extend_from_slice(&grads.bn_g[b]);
        out.extend_from_slice(&grads.bn_b[b]);
    }
    out.extend_from_slice(&grads.feat_w);
    out.extend_from_slice(&grads.feat_b);
    out.extend_from_slice(&grads.out_w);
    out.extend_from_slice(&grads.out_b);
    out
}

/// Per-block activations retained for backpropagation.
struct BlockPass<F> {
    /// Batch-norm output before ReLU, `[n, c, conv_len]`.
    pre_relu: Vec<F>,
    bn_cache: BatchNormCache<F>,
    /// Block output after ReLU, pool, and optional dropout, `[n, c, pool_len]`.
    post: Vec<F>,
    argmax: Vec<usize>,
    drop_mask: Option<DropoutMask>,
    conv_len: usize,
    pool_len: usize,
}

/// Whole-network activations for one training batch.
struct ForwardPass<F> {
    blocks: Vec<BlockPass<F>>,
    /// Feature layer pre-activation, `[n, feature_units]`.
    feat_pre: Vec<F>,
    /// Feature layer after ReLU and dropout — the classifier head's input.
    feat_drop: Vec<F>,
    feat_mask: Option<DropoutMask>,
    /// Softmax probabilities, `[n, num_classes]`.
    probs: Vec<F>,
}

/// Training-mode forward pass over a `[n, input_len]` batch. Updates
/// batch-norm running statistics and draws any dropout masks from `rng`.
fn forward_train<F: Real>(
    model: &mut Model<F>,
    x: &[F],
    n: usize,
    rng: &mut SeededRng,
) -> Result<ForwardPass<F>> {
    let mut len = model.config.input_length;
    let mut cur: Vec<F> = x.to_vec();
    let mut blocks = Vec::with_capacity(model.blocks.len());

    for block in model.blocks.iter_mut() {
        let c_out = block.conv.out_channels();
        let conv_len =
            conv1d_output_len(len, block.conv.kernel_len(), block.conv.stride, block.conv.padding)
                .expect("shape chain validated at build time");
        let mut conv_out = vec![F::zero(); n * c_out * conv_len];
        let c_in = block.conv.in_channels();
        for s in 0..n {
            conv_forward_slice(
                &cur[s * c_in * len..(s + 1) * c_in * len],
                len,
                &block.conv,
                &mut conv_out[s * c_out * conv_len..(s + 1) * c_out * conv_len],
                conv_len,
            );
        }

        let mut pre_relu = vec![F::zero(); conv_out.len()];
        let bn_cache =
            batchnorm_forward_train_cached(&conv_out, n, c_out, conv_len, &mut block.bn, &mut pre_relu);

        let mut relu_out = pre_relu.clone();
        relu_in_place(&mut relu_out);

        let pool_len = maxpool1d_output_len(conv_len, block.pool_size, block.pool_stride)
            .expect("shape chain validated at build time");
        let mut post = vec![F::zero(); n * c_out * pool_len];
        let mut argmax = vec![0usize; post.len()];
        maxpool_forward_slice(
            &relu_out,
            conv_len,
            n * c_out,
            block.pool_size,
            block.pool_stride,
            &mut post,
            pool_len,
            &mut argmax,
        );

        let drop_mask = if block.dropout_rate > 0.0 {
            Some(dropout_apply(&mut post, block.dropout_rate, rng)?)
        } else {
            None
        };

        cur = post.clone();
        len = pool_len;
        blocks.push(BlockPass {
            pre_relu,
            bn_cache,
            post,
            argmax,
            drop_mask,
            conv_len,
            pool_len,
        });
    }

    let units = model.config.feature_units;
    let flat = model.feature_layer.in_features();
    let mut feat_pre = vec![F::zero(); n * units];
    for s in 0..n {
        dense_forward_slice(
            &cur[s * flat..(s + 1) * flat],
            &model.feature_layer,
            &mut feat_pre[s * units..(s + 1) * units],
        );
    }
    let mut feat_drop = feat_pre.clone();
    relu_in_place(&mut feat_drop);
    let feat_mask = if model.config.dropout_rate > 0.0 {
        Some(dropout_apply(&mut feat_drop, model.config.dropout_rate, rng)?)
    } else {
        None
    };

    let classes = model.config.num_classes;
    let mut probs = vec![F::zero(); n * classes];
    let mut logits = vec![F::zero(); classes];
    for s in 0..n {
        dense_forward_slice(
            &feat_drop[s * units..(s + 1) * units],
            &model.output_layer,
            &mut logits,
        );
        let dist = softmax(&logits)?;
        probs[s * classes..(s + 1) * classes].copy_from_slice(dist.probs());
    }

    Ok(ForwardPass {
        blocks,
        feat_pre,
        feat_drop,
        feat_mask,
        probs,
    })
}

/// Gradient accumulators, one buffer per parameter tensor.
struct ParamGrads<F> {
    conv_k: Vec<Vec<F>>,
    conv_b: Vec<Vec<F>>,
    bn_g: Vec<Vec<F>>,
    bn_b: Vec<Vec<F>>,
    feat_w: Vec<F>,
    feat_b: Vec<F>,
    out_w: Vec<F>,
    out_b: Vec<F>,
}

impl<F: Real> ParamGrads<F> {
    fn zeroed(model: &Model<F>) -> Self {
        ParamGrads {
            conv_k: model
                .blocks
                .iter()
                .map(|b| vec![F::zero(); b.conv.kernels.len()])
                .collect(),
            conv_b: model
                .blocks
                .iter()
                .map(|b| vec![F::zero(); b.conv.bias.len()])
                .collect(),
            bn_g: model
                .blocks
                .iter()
                .map(|b| vec![F::zero(); b.bn.gamma.len()])
                .collect(),
            bn_b: model
                .blocks
                .iter()
                .map(|b| vec![F::zero(); b.bn.beta.len()])
                .collect(),
            feat_w: vec![F::zero(); model.feature_layer.weights.len()],
            feat_b: vec![F::zero(); model.feature_layer.bias.len()],
            out_w: vec![F::zero(); model.output_layer.weights.len()],
            out_b: vec![F::zero(); model.output_layer.bias.len()],
        }
    }
}

/// Backpropagates mean cross-entropy through the whole network,
/// accumulating parameter gradients into `grads`.
fn backward_batch<F: Real>(
    model: &Model<F>,
    x: &[F],
    n: usize,
    labels: &[usize],
    pass: &ForwardPass<F>,
    grads: &mut ParamGrads<F>,
) {
    let classes = model.config.num_classes;
    let units = model.config.feature_units;
    let inv_n = F::of(1.0 / n as f64);

    // Softmax + cross-entropy gradient: (p - onehot) / n.
    let mut dlogits = pass.probs.clone();
    for (s, &label) in labels.iter().enumerate() {
        dlogits[s * classes + label] -= F::one();
    }
    for g in &mut dlogits {
        *g *= inv_n;
    }

    let mut dfeat = vec![F::zero(); n * units];
    for s in 0..n {
        dense_backward_slice(
            &pass.feat_drop[s * units..(s + 1) * units],
            &model.output_layer,
            &dlogits[s * classes..(s + 1) * classes],
            &mut grads.out_w,
            &mut grads.out_b,
            &mut dfeat[s * units..(s + 1) * units],
        );
    }
    if let Some(mask) = &pass.feat_mask {
        dropout_backward(&mut dfeat, mask);
    }
    relu_backward_in_place(&mut dfeat, &pass.feat_pre);

    let flat = model.feature_layer.in_features();
    let mut dcur = vec![F::zero(); n * flat];
    let last_post = &pass.blocks.last().expect("at least one block").post;
    for s in 0..n {
        dense_backward_slice(
            &last_post[s * flat..(s + 1) * flat],
            &model.feature_layer,
            &dfeat[s * units..(s + 1) * units],
            &mut grads.feat_w,
            &mut grads.feat_b,
            &mut dcur[s * flat..(s + 1) * flat],
        );
    }

    for (b, block) in model.blocks.iter().enumerate().rev() {
        let bp = &pass.blocks[b];
        let c_out = block.conv.out_channels();
        let c_in = block.conv.in_channels();
        let in_len = input_len_of_block(model, b);

        if let Some(mask) = &bp.drop_mask {
            dropout_backward(&mut dcur, mask);
        }

        let mut drelu = vec![F::zero(); n * c_out * bp.conv_len];
        maxpool_backward_slice(
            &dcur,
            bp.pool_len,
            n * c_out,
            &bp.argmax,
            &mut drelu,
            bp.conv_len,
        );
        relu_backward_in_place(&mut drelu, &bp.pre_relu);

        let mut dconv = vec![F::zero(); drelu.len()];
        batchnorm_backward(
            &drelu,
            n,
            c_out,
            bp.conv_len,
            &block.bn,
            &bp.bn_cache,
            &mut grads.bn_g[b],
            &mut grads.bn_b[b],
            &mut dconv,
        );

        let input: &[F] = if b == 0 { x } else { &pass.blocks[b - 1].post };
        let mut dinput = vec![F::zero(); n * c_in * in_len];
        for s in 0..n {
            conv_backward_slice(
                &input[s * c_in * in_len..(s + 1) * c_in * in_len],
                in_len,
                &block.conv,
                &dconv[s * c_out * bp.conv_len..(s + 1) * c_out * bp.conv_len],
                bp.conv_len,
                &mut grads.conv_k[b],
                &mut grads.conv_b[b],
                &mut dinput[s * c_in * in_len..(s + 1) * c_in * in_len],
            );
        }
        dcur = dinput;
    }
}

/// Signal length entering block `b`.
fn input_len_of_block<F: Real>(model: &Model<F>, b: usize) -> usize {
    if b == 0 {
        model.config.input_length
    } else {
        model
            .config
            .shape_chain()
            .expect("validated at build time")[b - 1]
            .1
    }
}

/// One Adam state per parameter tensor, stepped in a fixed order.
struct AdamStates<F> {
    conv_k: Vec<AdamState<F>>,
    conv_b: Vec<AdamState<F>>,
    bn_g: Vec<AdamState<F>>,
    bn_b: Vec<AdamState<F>>,
    feat_w: AdamState<F>,
    feat_b: AdamState<F>,
    out_w: AdamState<F>,
    out_b: AdamState<F>,
}

impl<F: Real> AdamStates<F> {
    fn new(model: &Model<F>) -> Self {
        AdamStates {
            conv_k: model
                .blocks
                .iter()
                .map(|b| AdamState::new(b.conv.kernels.len()))
                .collect(),
            conv_b: model
                .blocks
                .iter()
                .map(|b| AdamState::new(b.conv.bias.len()))
                .collect(),
            bn_g: model
                .blocks
                .iter()
                .map(|b| AdamState::new(b.bn.gamma.len()))
                .collect(),
            bn_b: model
                .blocks
                .iter()
                .map(|b| AdamState::new(b.bn.beta.len()))
                .collect(),
            feat_w: AdamState::new(model.feature_layer.weights.len()),
            feat_b: AdamState::new(model.feature_layer.bias.len()),
            out_w: AdamState::new(model.output_layer.weights.len()),
            out_b: AdamState::new(model.output_layer.bias.len()),
        }
    }

    fn apply(&mut self, model: &mut Model<F>, grads: &ParamGrads<F>, hyper: &AdamHyper) {
        for (b, block) in model.blocks.iter_mut().enumerate() {
            adam_step(
                block.conv.kernels.data_mut(),
                &grads.conv_k[b],
                &mut self.conv_k[b],
                hyper,
            );
            adam_step(&mut block.conv.bias, &grads.conv_b[b], &mut self.conv_b[b], hyper);
            adam_step(&mut block.bn.gamma, &grads.bn_g[b], &mut self.bn_g[b], hyper);
            adam_step(&mut block.bn.beta, &grads.bn_b[b], &mut self.bn_b[b], hyper);
        }
        adam_step(
            model.feature_layer.weights.data_mut(),
            &grads.feat_w,
            &mut self.feat_w,
            hyper,
        );
        adam_step(&mut model.feature_layer.bias, &grads.feat_b, &mut self.feat_b, hyper);
        adam_step(
            model.output_layer.weights.data_mut(),
            &grads.out_w,
            &mut self.out_w,
            hyper,
        );
        adam_step(&mut model.output_layer.bias, &grads.out_b, &mut self.out_b, hyper);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_class_specs, generate_synthetic_dataset};
    use crate::wdcnn::model::{build_model, ArchitectureConfig};

    fn small_dataset(per_class: usize, seed: u64) -> LabeledDataset<f32> {
        let specs = default_class_specs();
        generate_synthetic_dataset(&specs[..3], &[per_class; 3], seed).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 1;
        assert!(cfg.validate().is_err());
        cfg.batch_size = 64;
        cfg.val_fraction = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn label_out_of_range_rejected() {
        let model = build_model::<f32>(&ArchitectureConfig::default_for_classes(2), 1).unwrap();
        let ds = small_dataset(2, 1); // labels 0..3
        let err = train(model, &ds, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn overfits_a_tiny_subset() {
        let ds = small_dataset(4, 5); // 12 windows, 3 classes
        let model = build_model::<f32>(&ArchitectureConfig::default_for_classes(3), 7).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 12,
            seed: 11,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        let (trained, history) = train(model, &ds, &cfg).unwrap();
        let last = history.last().unwrap();
        assert_eq!(last.train_accuracy, 1.0, "history: {:?}", &history[history.len().saturating_sub(5)..]);
        // the returned model itself predicts the training set perfectly
        let mut correct = 0;
        for (w, &l) in ds.windows().iter().zip(ds.labels()) {
            if trained.predict(w).unwrap().argmax() == l {
                correct += 1;
            }
        }
        assert_eq!(correct, ds.len());
        // training reduced the loss
        assert!(last.train_loss < history[0].train_loss);
        assert!(history.iter().all(|e| e.train_loss.is_finite()));
    }

    #[test]
    fn identical_seeds_identical_history() {
        let ds = small_dataset(4, 9);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            seed: 21,
            val_fraction: 0.25,
            ..TrainConfig::default()
        };
        let m1 = build_model::<f32>(&ArchitectureConfig::default_for_classes(3), 2).unwrap();
        let m2 = build_model::<f32>(&ArchitectureConfig::default_for_classes(3), 2).unwrap();
        let (t1, h1) = train(m1, &ds, &cfg).unwrap();
        let (t2, h2) = train(m2, &ds, &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn best_validation_epoch_is_returned() {
        let ds = small_dataset(6, 13);
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 6,
            seed: 3,
            patience: None,
            val_fraction: 0.2,
            ..TrainConfig::default()
        };
        let model = build_model::<f32>(&ArchitectureConfig::default_for_classes(3), 4).unwrap();
        let (_, history) = train(model, &ds, &cfg).unwrap();
        assert_eq!(history.len(), 8);
        assert!(history.iter().all(|e| e.val_loss.is_some()));
    }

    #[test]
    fn patience_stops_early() {
        let ds = small_dataset(6, 13);
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 6,
            seed: 3,
            patience: Some(2),
            val_fraction: 0.2,
            ..TrainConfig::default()
        };
        let model = build_model::<f32>(&ArchitectureConfig::default_for_classes(3), 4).unwrap();
        let (_, history) = train(model, &ds, &cfg).unwrap();
        assert!(history.len() < 50, "expected an early stop, ran all epochs");
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = LabeledDataset::<f32>::new(vec![], vec![], vec![]).unwrap();
        let model = build_model::<f32>(&ArchitectureConfig::default_for_classes(2), 1).unwrap();
        assert!(train(model, &ds, &TrainConfig::default()).is_err());
    }

    #[test]
    fn full_network_backward_matches_numeric_gradient() {
        use crate::nn::PaddingMode;

        // Deliberately small: ~130 parameters, two conv blocks, no dropout so
        // the loss is a smooth function of the parameters.
        let arch = ArchitectureConfig {
            input_length: 32,
            conv_blocks: vec![
                crate::wdcnn::model::ConvBlockSpec {
                    out_channels: 2,
                    kernel_len: 8,
                    stride: 2,
                    padding: PaddingMode::Same,
                    pool_size: 2,
                    pool_stride: 2,
                    dropout_rate: 0.0,
                },
                crate::wdcnn::model::ConvBlockSpec {
                    out_channels: 3,
                    kernel_len: 3,
                    stride: 1,
                    padding: PaddingMode::Valid,
                    pool_size: 2,
                    pool_stride: 2,
                    dropout_rate: 0.0,
                },
            ],
            feature_units: 6,
            num_classes: 3,
            dropout_rate: 0.0,
        };

        for net_seed in [17u64, 18] {
            let model = build_model::<f64>(&arch, net_seed).unwrap();
            let n = 4usize;
            let mut data_rng = seeded(net_seed ^ 0xda7a);
            let x: Vec<f64> = (0..n * arch.input_length)
                .map(|_| data_rng.sample(StandardNormal))
                .collect();
            let labels = [0usize, 1, 2, 0];

            let mut m = model.clone();
            let pass = forward_train(&mut m, &x, n, &mut seeded(99)).unwrap();
            let mut grads = ParamGrads::zeroed(&m);
            backward_batch(&m, &x, n, &labels, &pass, &mut grads);
            let analytic = gather_grads(&grads);

            let params = gather_params(&model);
            assert_eq!(params.len(), analytic.len());
            assert!(params.len() <= 5_000);
            let numeric = numeric_gradient(&params, 1e-5, |p| {
                let mut probe = model.clone();
                scatter_params(&mut probe, p);
                let pass = forward_train(&mut probe, &x, n, &mut seeded(99))?;
                let classes = probe.config.num_classes;
                let mut loss = 0.0f64;
                for (s, &label) in labels.iter().enumerate() {
                    loss += -pass.probs[s * classes + label].max(PROB_CLAMP).ln();
                }
                Ok(loss / n as f64)
            })
            .unwrap();

            let mut checked = 0usize;
            for (i, (&a, &g)) in analytic.iter().zip(&numeric).enumerate() {
                if a.abs() <= 1e-8 {
                    continue;
                }
                checked += 1;
                let rel = (a - g).abs() / a.abs().max(g.abs());
                assert!(
                    rel < 1e-3,
                    "seed {net_seed} coordinate {i}: analytic {a:e}, numeric {g:e}, rel {rel:e}"
                );
            }
            assert!(
                checked > params.len() / 2,
                "only {checked} of {} coordinates exceeded the magnitude floor",
                params.len()
            );
        }
    }

    #[test]
    fn gradient_check_passes_with_dropout_enabled() {
        use crate::nn::PaddingMode;

        // Dropout on both a conv block and the feature layer: the frozen
        // mask seed must keep the loss differentiable through the masks.
        let arch = ArchitectureConfig {
            input_length: 64,
            conv_blocks: vec![
                crate::wdcnn::model::ConvBlockSpec {
                    out_channels: 2,
                    kernel_len: 8,
                    stride: 2,
                    padding: PaddingMode::Same,
                    pool_size: 2,
                    pool_stride: 2,
                    dropout_rate: 0.25,
                },
                crate::wdcnn::model::ConvBlockSpec {
                    out_channels: 3,
                    kernel_len: 3,
                    stride: 1,
                    padding: PaddingMode::Valid,
                    pool_size: 2,
                    pool_stride: 2,
                    dropout_rate: 0.0,
                },
            ],
            feature_units: 5,
            num_classes: 3,
            dropout_rate: 0.4,
        };
        let report = gradient_check(&arch, 4, 23).unwrap();
        assert!(
            report.max_rel_error < 1e-3,
            "max relative error {:.3e} over {} of {} coordinates",
            report.max_rel_error,
            report.compared,
            report.total_params
        );
        assert!(report.compared > 0);
        // dropout zeroes some paths, so a few gradients legitimately sit at 0
        assert!(report.compared <= report.total_params);
    }

    #[test]
    fn gradient_check_rejects_tiny_batches() {
        let arch = ArchitectureConfig::default_for_classes(2);
        assert!(gradient_check(&arch, 1, 1).is_err());
    }
}
