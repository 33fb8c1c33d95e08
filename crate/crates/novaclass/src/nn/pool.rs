//! 1-d max pooling.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Output length of max pooling a signal of length `input_len`.
pub fn maxpool1d_output_len(input_len: usize, width: usize, stride: usize) -> Result<usize> {
    if width == 0 || stride == 0 {
        return Err(Error::invalid_argument(
            "pool width and stride must be at least 1",
        ));
    }
    if input_len < width {
        return Err(Error::invalid_argument(format!(
            "signal length {input_len} shorter than pool width {width}"
        )));
    }
    Ok((input_len - width) / stride + 1)
}

/// Max-pools a `[C, L]` signal into `[C, L']`; any trailing samples that do
/// not fill a window are dropped.
pub fn maxpool1d_forward<F: Real>(
    input: &Tensor<F>,
    width: usize,
    stride: usize,
) -> Result<Tensor<F>> {
    if input.shape().len() != 2 {
        return Err(Error::invalid_argument(
            "pool input must have shape [channels, length]",
        ));
    }
    let (channels, len) = (input.shape()[0], input.shape()[1]);
    let out_len = maxpool1d_output_len(len, width, stride)?;
    let mut out = Tensor::zeros(vec![channels, out_len]);
    let mut argmax = vec![0usize; channels * out_len];
    maxpool_forward_slice(
        input.data(),
        len,
        channels,
        width,
        stride,
        out.data_mut(),
        out_len,
        &mut argmax,
    );
    Ok(out)
}

/// Slice-level forward kernel; records the within-row index of each window
/// maximum (ties resolve to the earliest sample) for the backward pass.
#[allow(clippy::too_many_arguments)]
pub(crate) fn maxpool_forward_slice<F: Real>(
    input: &[F],
    input_len: usize,
    channels: usize,
    width: usize,
    stride: usize,
    output: &mut [F],
    out_len: usize,
    argmax: &mut [usize],
) {
    for c in 0..channels {
        let in_row = &input[c * input_len..(c + 1) * input_len];
        let out_row = &mut output[c * out_len..(c + 1) * out_len];
        let arg_row = &mut argmax[c * out_len..(c + 1) * out_len];
        for o in 0..out_len {
            let start = o * stride;
            let mut best = in_row[start];
            let mut best_idx = start;
            for (offset, &v) in in_row[start + 1..start + width].iter().enumerate() {
                if v > best {
                    best = v;
                    best_idx = start + 1 + offset;
                }
            }
            out_row[o] = best;
            arg_row[o] = best_idx;
        }
    }
}

/// Routes each output gradient back to the sample that won its window.
pub(crate) fn maxpool_backward_slice<F: Real>(
    grad_out: &[F],
    out_len: usize,
    channels: usize,
    argmax: &[usize],
    grad_input: &mut [F],
    input_len: usize,
) {
    grad_input.fill(F::zero());
    for c in 0..channels {
        let g_row = &grad_out[c * out_len..(c + 1) * out_len];
        let arg_row = &argmax[c * out_len..(c + 1) * out_len];
        let gin_row = &mut grad_input[c * input_len..(c + 1) * input_len];
        for (o, &idx) in arg_row.iter().enumerate() {
            gin_row[idx] += g_row[o];
        }
    }
}
