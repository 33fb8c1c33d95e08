//! 1-d convolution.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// How the signal is padded before convolving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingMode {
    /// Zero padding sized so the output length is `ceil(L / stride)`. Padding
    /// is split symmetrically with the extra sample on the right when odd.
    Same,
    /// No padding; the kernel must fit inside the signal.
    Valid,
}

/// A 1-d convolution layer.
///
/// Kernels are stored as a `[out_channels, in_channels, kernel_length]`
/// tensor with one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1DLayer<F> {
    pub kernels: Tensor<F>,
    pub bias: Vec<F>,
    pub stride: usize,
    pub padding: PaddingMode,
}

impl<F: Real> Conv1DLayer<F> {
    pub fn new(kernels: Tensor<F>, bias: Vec<F>, stride: usize, padding: PaddingMode) -> Result<Self> {
        if kernels.shape().len() != 3 {
            return Err(Error::invalid_argument(
                "conv kernels must have shape [out_channels, in_channels, kernel_length]",
            ));
        }
        if kernels.shape()[0] != bias.len() {
            return Err(Error::invalid_argument(format!(
                "conv bias length {} does not match {} output channels",
                bias.len(),
                kernels.shape()[0]
            )));
        }
        if kernels.shape()[2] == 0 || stride == 0 {
            return Err(Error::invalid_argument(
                "kernel length and stride must be at least 1",
            ));
        }
        Ok(Conv1DLayer {
            kernels,
            bias,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }

    /// Left zero-padding for an input of length `input_len`.
    pub(crate) fn pad_left(&self, input_len: usize) -> usize {
        match self.padding {
            PaddingMode::Valid => 0,
            PaddingMode::Same => {
                let out_len = input_len.div_ceil(self.stride);
                let total = ((out_len - 1) * self.stride + self.kernel_len())
                    .saturating_sub(input_len);
                total / 2
            }
        }
    }
}

/// Output length of a convolution over a signal of length `input_len`.
pub fn conv1d_output_len(
    input_len: usize,
    kernel_len: usize,
    stride: usize,
    padding: PaddingMode,
) -> Result<usize> {
    if kernel_len == 0 || stride == 0 {
        return Err(Error::invalid_argument(
            "kernel length and stride must be at least 1",
        ));
    }
    match padding {
        PaddingMode::Valid => {
            if input_len < kernel_len {
                return Err(Error::invalid_argument(format!(
                    "signal length {input_len} shorter than kernel {kernel_len} in valid mode"
                )));
            }
            Ok((input_len - kernel_len) / stride + 1)
        }
        PaddingMode::Same => Ok(input_len.div_ceil(stride)),
    }
}

/// Convolves a `[C_in, L]` signal, producing `[C_out, L']`.
pub fn conv1d_forward<F: Real>(input: &Tensor<F>, layer: &Conv1DLayer<F>) -> Result<Tensor<F>> {
    if input.shape().len() != 2 {
        return Err(Error::invalid_argument(
            "conv input must have shape [channels, length]",
        ));
    }
    let (c_in, len) = (input.shape()[0], input.shape()[1]);
    if c_in != layer.in_channels() {
        return Err(Error::invalid_argument(format!(
            "input has {} channels, layer expects {}",
            c_in,
            layer.in_channels()
        )));
    }
    let out_len = conv1d_output_len(len, layer.kernel_len(), layer.stride, layer.padding)?;
    let mut out = Tensor::zeros(vec![layer.out_channels(), out_len]);
    conv_forward_slice(input.data(), len, layer, out.data_mut(), out_len);
    Ok(out)
}

/// Slice-level forward kernel shared with the batched training path.
///
/// `input` is `[C_in, L]` flat, `output` is `[C_out, L']` flat and fully
/// overwritten.
pub(crate) fn conv_forward_slice<F: Real>(
    input: &[F],
    input_len: usize,
    layer: &Conv1DLayer<F>,
    output: &mut [F],
    out_len: usize,
) {
    let c_in = layer.in_channels();
    let c_out = layer.out_channels();
    let k = layer.kernel_len();
    let stride = layer.stride;
    let pad = layer.pad_left(input_len);
    let kernels = layer.kernels.data();

    for co in 0..c_out {
        let out_row = &mut output[co * out_len..(co + 1) * out_len];
        out_row.fill(layer.bias[co]);
        for ci in 0..c_in {
            let in_row = &input[ci * input_len..(ci + 1) * input_len];
            let k_row = &kernels[(co * c_in + ci) * k..(co * c_in + ci + 1) * k];
            for (t, &w) in k_row.iter().enumerate() {
                let (o_lo, o_hi) = tap_range(input_len, out_len, stride, pad, t);
                if stride == 1 {
                    // contiguous: out[o] += w * in[o + t - pad]
                    let base = o_lo + t - pad;
                    let src = &in_row[base..base + (o_hi - o_lo)];
                    let dst = &mut out_row[o_lo..o_hi];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                } else {
                    for o in o_lo..o_hi {
                        out_row[o] += w * in_row[o * stride + t - pad];
                    }
                }
            }
        }
    }
}

/// Backward kernel: accumulates parameter gradients and writes the input
/// gradient for one sample.
///
/// `grad_out` is `[C_out, L']`; `grad_input` is `[C_in, L]` and fully
/// overwritten; `grad_kernels`/`grad_bias` are accumulated into.
pub(crate) fn conv_backward_slice<F: Real>(
    input: &[F],
    input_len: usize,
    layer: &Conv1DLayer<F>,
    grad_out: &[F],
    out_len: usize,
    grad_kernels: &mut [F],
    grad_bias: &mut [F],
    grad_input: &mut [F],
) {
    let c_in = layer.in_channels();
    let c_out = layer.out_channels();
    let k = layer.kernel_len();
    let stride = layer.stride;
    let pad = layer.pad_left(input_len);
    let kernels = layer.kernels.data();

    grad_input.fill(F::zero());

    for co in 0..c_out {
        let g_row = &grad_out[co * out_len..(co + 1) * out_len];
        grad_bias[co] += sum4(g_row);
        for ci in 0..c_in {
            let in_row = &input[ci * input_len..(ci + 1) * input_len];
            let gin_row = &mut grad_input[ci * input_len..(ci + 1) * input_len];
            let k_base = (co * c_in + ci) * k;
            for t in 0..k {
                let (o_lo, o_hi) = tap_range(input_len, out_len, stride, pad, t);
                if o_lo >= o_hi {
                    continue;
                }
                let w = kernels[k_base + t];
                if stride == 1 {
                    let base = o_lo + t - pad;
                    let src = &in_row[base..base + (o_hi - o_lo)];
                    grad_kernels[k_base + t] += dot4(src, &g_row[o_lo..o_hi]);
                    let dst = &mut gin_row[base..base + (o_hi - o_lo)];
                    for (d, &g) in dst.iter_mut().zip(&g_row[o_lo..o_hi]) {
                        *d += w * g;
                    }
                } else {
                    let mut acc = F::zero();
                    for o in o_lo..o_hi {
                        let idx = o * stride + t - pad;
                        acc += in_row[idx] * g_row[o];
                        gin_row[idx] += w * g_row[o];
                    }
                    grad_kernels[k_base + t] += acc;
                }
            }
        }
    }
}

/// Output positions whose tap `t` lands inside the unpadded signal.
#[inline]
fn tap_range(
    input_len: usize,
    out_len: usize,
    stride: usize,
    pad: usize,
    t: usize,
) -> (usize, usize) {
    let o_lo = if pad > t {
        (pad - t).div_ceil(stride)
    } else {
        0
    };
    let o_hi = if input_len + pad > t {
        ((input_len + pad - t - 1) / stride + 1).min(out_len)
    } else {
        0
    };
    (o_lo, o_hi.max(o_lo))
}

/// Four-accumulator dot product; fixed summation order keeps it
/// deterministic while breaking the add-latency chain.
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

#[inline]
fn sum4<F: Real>(a: &[F]) -> F {
    let mut acc = [F::zero(); 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j];
        acc[1] += a[j + 1];
        acc[2] += a[j + 2];
        acc[3] += a[j + 3];
    }
    let mut tail = F::zero();
    for j in chunks * 4..a.len() {
        tail += a[j];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}
