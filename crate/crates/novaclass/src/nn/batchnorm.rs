//! Per-channel batch normalization for 1-d feature maps.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Batch normalization over the channel axis of `[C, L]` feature maps.
///
/// Training batches are normalized with biased per-channel statistics taken
/// over the batch and length axes; inference uses the running estimates,
/// updated as `running = (1 - momentum) * running + momentum * batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1DLayer<F> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub eps: F,
    pub momentum: F,
}

impl<F: Real> BatchNorm1DLayer<F> {
    pub fn new(channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid_argument(
                "batchnorm needs at least one channel",
            ));
        }
        Ok(BatchNorm1DLayer {
            gamma: vec![F::one(); channels],
            beta: vec![F::zero(); channels],
            running_mean: vec![F::zero(); channels],
            running_var: vec![F::one(); channels],
            eps: F::of(1e-5),
            momentum: F::of(0.1),
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Values saved by the training forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<F> {
    /// Normalized activations, same layout as the batch.
    pub(crate) xhat: Vec<F>,
    /// Per-channel `1 / sqrt(var + eps)`.
    pub(crate) inv_std: Vec<F>,
}

/// Normalizes a `[C, L]` feature map with the layer's running statistics
/// (inference mode).
pub fn batchnorm_forward<F: Real>(
    input: &Tensor<F>,
    layer: &BatchNorm1DLayer<F>,
) -> Result<Tensor<F>> {
    if input.shape().len() != 2 {
        return Err(Error::invalid_argument(
            "batchnorm input must have shape [channels, length]",
        ));
    }
    let (channels, len) = (input.shape()[0], input.shape()[1]);
    if channels != layer.channels() {
        return Err(Error::invalid_argument(format!(
            "input has {} channels, layer expects {}",
            channels,
            layer.channels()
        )));
    }
    let mut out = Tensor::zeros(vec![channels, len]);
    batchnorm_infer_slice(input.data(), 1, channels, len, layer, out.data_mut());
    Ok(out)
}

/// Inference kernel over a `[N, C, L]` flat batch using running statistics.
pub(crate) fn batchnorm_infer_slice<F: Real>(
    input: &[F],
    batch: usize,
    channels: usize,
    len: usize,
    layer: &BatchNorm1DLayer<F>,
    output: &mut [F],
) {
    for c in 0..channels {
        let inv_std = (layer.running_var[c] + layer.eps).sqrt().recip();
        let scale = layer.gamma[c] * inv_std;
        let shift = layer.beta[c] - layer.running_mean[c] * scale;
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for i in base..base + len {
                output[i] = input[i] * scale + shift;
            }
        }
    }
}

/// Training kernel over a `[N, C, L]` flat batch: normalizes with biased
/// batch statistics, updates the running estimates, and returns the cache
/// needed by [`batchnorm_backward`].
pub(crate) fn batchnorm_forward_train_cached<F: Real>(
    input: &[F],
    batch: usize,
    channels: usize,
    len: usize,
    layer: &mut BatchNorm1DLayer<F>,
    output: &mut [F],
) -> BatchNormCache<F> {
    debug_assert_eq!(input.len(), batch * channels * len);
    let m = F::of((batch * len) as f64);
    let one = F::one();
    let mut xhat = vec![F::zero(); input.len()];
    let mut inv_std_all = vec![F::zero(); channels];

    for c in 0..channels {
        let mut sum = F::zero();
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for &v in &input[base..base + len] {
                sum += v;
            }
        }
        let mean = sum / m;

        let mut sq = F::zero();
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for &v in &input[base..base + len] {
                let d = v - mean;
                sq += d * d;
            }
        }
        let var = sq / m;
        let inv_std = (var + layer.eps).sqrt().recip();
        inv_std_all[c] = inv_std;

        layer.running_mean[c] = (one - layer.momentum) * layer.running_mean[c] + layer.momentum * mean;
        layer.running_var[c] = (one - layer.momentum) * layer.running_var[c] + layer.momentum * var;

        let gamma = layer.gamma[c];
        let beta = layer.beta[c];
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for i in base..base + len {
                let xh = (input[i] - mean) * inv_std;
                xhat[i] = xh;
                output[i] = gamma * xh + beta;
            }
        }
    }

    BatchNormCache {
        xhat,
        inv_std: inv_std_all,
    }
}

/// Backward pass through the training-mode normalization, differentiating
/// the batch statistics as well:
/// `dx = inv_std / M * (M * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn batchnorm_backward<F: Real>(
    grad_out: &[F],
    batch: usize,
    channels: usize,
    len: usize,
    layer: &BatchNorm1DLayer<F>,
    cache: &BatchNormCache<F>,
    grad_gamma: &mut [F],
    grad_beta: &mut [F],
    grad_input: &mut [F],
) {
    let m = F::of((batch * len) as f64);
    for c in 0..channels {
        let gamma = layer.gamma[c];
        let inv_std = cache.inv_std[c];

        let mut sum_dy = F::zero();
        let mut sum_dy_xhat = F::zero();
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for i in base..base + len {
                sum_dy += grad_out[i];
                sum_dy_xhat += grad_out[i] * cache.xhat[i];
            }
        }
        grad_beta[c] += sum_dy;
        grad_gamma[c] += sum_dy_xhat;

        let scale = gamma * inv_std / m;
        for n in 0..batch {
            let base = (n * channels + c) * len;
            for i in base..base + len {
                grad_input[i] =
                    scale * (m * grad_out[i] - sum_dy - cache.xhat[i] * sum_dy_xhat);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_batch_normalizes_to_near_unit() {
        let mut layer = BatchNorm1DLayer::<f64>::new(1).unwrap();
        let input = [1.0, 3.0];
        let mut out = [0.0; 2];
        batchnorm_forward_train_cached(&input, 1, 1, 2, &mut layer, &mut out);
        // mean 2, biased var 1, eps 1e-5
        assert!((out[0] - -0.99999500003749968).abs() < 1e-15);
        assert!((out[1] - 0.99999500003749968).abs() < 1e-15);
    }

    #[test]
    fn running_statistics_blend_toward_batch() {
        let mut layer = BatchNorm1DLayer::<f64>::new(1).unwrap();
        let input = [1.0, 3.0];
        let mut out = [0.0; 2];
        batchnorm_forward_train_cached(&input, 1, 1, 2, &mut layer, &mut out);
        // running_mean: 0.9 * 0 + 0.1 * 2 = 0.2; running_var: 0.9 * 1 + 0.1 * 1 = 1
        assert!((layer.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((layer.running_var[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_beta_rescale_output() {
        let mut layer = BatchNorm1DLayer::<f64>::new(1).unwrap();
        layer.gamma[0] = 2.0;
        layer.beta[0] = 10.0;
        let input = [1.0, 3.0];
        let mut out = [0.0; 2];
        batchnorm_forward_train_cached(&input, 1, 1, 2, &mut layer, &mut out);
        assert!((out[0] - (10.0 - 2.0 * 0.99999500003749968)).abs() < 1e-14);
        assert!((out[1] - (10.0 + 2.0 * 0.99999500003749968)).abs() < 1e-14);
    }

    #[test]
    fn inference_uses_running_statistics() {
        let mut layer = BatchNorm1DLayer::<f64>::new(1).unwrap();
        layer.running_mean[0] = 5.0;
        layer.running_var[0] = 4.0;
        let input = Tensor::new(vec![1, 2], vec![5.0, 7.0]).unwrap();
        let out = batchnorm_forward(&input, &layer).unwrap();
        // (5-5)/sqrt(4+1e-5) = 0, (7-5)/sqrt(4+1e-5) ~ 1
        assert!(out.data()[0].abs() < 1e-12);
        assert!((out.data()[1] - 2.0 / (4.0f64 + 1e-5).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn statistics_pool_across_batch_and_length() {
        // Two samples, one channel, length 2: stats over all four values.
        let mut layer = BatchNorm1DLayer::<f64>::new(1).unwrap();
        let input = [1.0, 2.0, 3.0, 4.0];
        let mut out = [0.0; 4];
        batchnorm_forward_train_cached(&input, 2, 1, 2, &mut layer, &mut out);
        // mean 2.5, biased var 1.25
        let inv = 1.0 / (1.25f64 + 1e-5).sqrt();
        for (i, &x) in input.iter().enumerate() {
            assert!((out[i] - (x - 2.5) * inv).abs() < 1e-14);
        }
        // output is (near) zero-mean
        let mean: f64 = out.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-14);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let layer = BatchNorm1DLayer::<f64>::new(2).unwrap();
        let input = Tensor::new(vec![1, 4], vec![0.0; 4]).unwrap();
        assert!(matches!(
            batchnorm_forward(&input, &layer),
            Err(Error::InvalidArgument(_))
        ));
    }
}
