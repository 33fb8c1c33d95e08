//! Softmax and ReLU activations.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A probability distribution over classes, the output of [`softmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution<F> {
    probs: Vec<F>,
}

impl<F: Real> PredictionDistribution<F> {
    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable class; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn from_probs(probs: Vec<F>) -> Self {
        PredictionDistribution { probs }
    }
}

/// True class label, the one-hot reference vector in implied form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLabel {
    pub class_index: usize,
}

impl OneHotLabel {
    pub fn new(class_index: usize) -> Self {
        OneHotLabel { class_index }
    }
}

/// Numerically stable softmax: shifts logits by their maximum before
/// exponentiating, which preserves the distribution and the argmax.
pub fn softmax<F: Real>(logits: &[F]) -> Result<PredictionDistribution<F>> {
    if logits.is_empty() {
        return Err(Error::invalid_argument("softmax of empty logit vector"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("softmax of non-finite logits"));
    }
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let mut probs: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: F = probs.iter().cloned().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(PredictionDistribution::from_probs(probs))
}

pub(crate) fn relu_in_place<F: Real>(xs: &mut [F]) {
    for x in xs {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}

/// Zeroes gradient entries where the forward pre-activation was non-positive.
pub(crate) fn relu_backward_in_place<F: Real>(grad: &mut [F], pre_activation: &[F]) {
    debug_assert_eq!(grad.len(), pre_activation.len());
    for (g, &x) in grad.iter_mut().zip(pre_activation) {
        if x <= F::zero() {
            *g = F::zero();
        }
    }
}
