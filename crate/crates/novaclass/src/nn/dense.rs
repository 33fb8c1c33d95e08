//! Fully connected layers.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// A fully connected layer computing `y = W x + b`.
///
/// Weights are stored as a `[out_features, in_features]` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F> {
    pub weights: Tensor<F>,
    pub bias: Vec<F>,
}

impl<F: Real> DenseLayer<F> {
    pub fn new(weights: Tensor<F>, bias: Vec<F>) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::invalid_argument(
                "dense weights must have shape [out_features, in_features]",
            ));
        }
        if weights.shape()[0] != bias.len() {
            return Err(Error::invalid_argument(format!(
                "dense bias length {} does not match {} output features",
                bias.len(),
                weights.shape()[0]
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[1]
    }
}

/// Applies the layer to a flat feature vector.
pub fn dense_forward<F: Real>(input: &[F], layer: &DenseLayer<F>) -> Result<Vec<F>> {
    if input.len() != layer.in_features() {
        return Err(Error::invalid_argument(format!(
            "dense input has {} features, layer expects {}",
            input.len(),
            layer.in_features()
        )));
    }
    let mut out = vec![F::zero(); layer.out_features()];
    dense_forward_slice(input, layer, &mut out);
    Ok(out)
}

/// Slice-level forward kernel shared with the batched training path.
pub(crate) fn dense_forward_slice<F: Real>(input: &[F], layer: &DenseLayer<F>, output: &mut [F]) {
    let n_in = layer.in_features();
    let w = layer.weights.data();
    for (o, out) in output.iter_mut().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        *out = layer.bias[o] + dot4(row, input);
    }
}

/// Backward kernel: accumulates parameter gradients and writes the input
/// gradient for one sample.
pub(crate) fn dense_backward_slice<F: Real>(
    input: &[F],
    layer: &DenseLayer<F>,
    grad_out: &[F],
    grad_weights: &mut [F],
    grad_bias: &mut [F],
    grad_input: &mut [F],
) {
    let n_in = layer.in_features();
    let w = layer.weights.data();
    grad_input.fill(F::zero());
    for (o, &g) in grad_out.iter().enumerate() {
        grad_bias[o] += g;
        let w_row = &w[o * n_in..(o + 1) * n_in];
        let gw_row = &mut grad_weights[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            gw_row[i] += g * input[i];
            grad_input[i] += g * w_row[i];
        }
    }
}

#[inline]
fn dot4<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = F::zero();
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}
