//! Inverted dropout.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Real;
use rand::RngExt;

/// Which activations a dropout application kept, for replay in the backward
/// pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub(crate) kept: Vec<bool>,
    pub(crate) scale: f64,
}

impl DropoutMask {
    /// A mask that keeps everything (used when dropout is disabled).
    pub(crate) fn keep_all(len: usize) -> Self {
        DropoutMask {
            kept: vec![true; len],
            scale: 1.0,
        }
    }
}

/// Zeroes each value with probability `rate` and scales survivors by
/// `1 / (1 - rate)` so the expected activation is unchanged.
pub fn dropout_apply<F: Real>(
    values: &mut [F],
    rate: f64,
    rng: &mut SeededRng,
) -> Result<DropoutMask> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid_argument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(DropoutMask::keep_all(values.len()));
    }
    let scale = 1.0 / (1.0 - rate);
    let scale_f = F::of(scale);
    let mut kept = vec![false; values.len()];
    for (v, flag) in values.iter_mut().zip(kept.iter_mut()) {
        if rng.random::<f64>() >= rate {
            *flag = true;
            *v *= scale_f;
        } else {
            *v = F::zero();
        }
    }
    Ok(DropoutMask { kept, scale })
}

/// Replays a mask over the incoming gradient.
pub(crate) fn dropout_backward<F: Real>(grad: &mut [F], mask: &DropoutMask) {
    debug_assert_eq!(grad.len(), mask.kept.len());
    let scale = F::of(mask.scale);
    for (g, &keep) in grad.iter_mut().zip(&mask.kept) {
        if keep {
            *g *= scale;
        } else {
            *g = F::zero();
        }
    }
}
