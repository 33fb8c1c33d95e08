//! Cross-entropy loss.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::activations::{OneHotLabel, PredictionDistribution};

/// Probabilities are clamped at this floor before taking the logarithm.
pub const PROB_CLAMP: f64 = 1e-12;

/// Cross-entropy between a predicted distribution and a one-hot label:
/// `-log(p[label])`, with the probability clamped at 1e-12.
pub fn cross_entropy<F: Real>(p: &PredictionDistribution<F>, r: OneHotLabel) -> Result<F> {
    if r.class_index >= p.len() {
        return Err(Error::invalid_argument(format!(
            "label {} out of range for {} classes",
            r.class_index,
            p.len()
        )));
    }
    let clamped = p.probs()[r.class_index].max(F::of(PROB_CLAMP));
    Ok(-clamped.ln())
}
