//! Numeric gradient oracle for validating analytic backpropagation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Estimates `∂loss/∂params` by central differences:
/// `(loss(θ + h·eᵢ) − loss(θ − h·eᵢ)) / (2h)` for each parameter.
///
/// The closure is called with a full parameter vector and must be a pure
/// function of it (reseed any internal randomness per call). Intended for
/// `f64` test models; cost is two loss evaluations per parameter.
pub fn numeric_gradient<F, L>(params: &[F], h: f64, mut loss: L) -> Result<Vec<F>>
where
    F: Real,
    L: FnMut(&[F]) -> Result<F>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid_argument(format!(
            "step size must be positive and finite, got {h}"
        )));
    }
    let step = F::of(h);
    let two_h = F::of(2.0 * h);
    let mut scratch = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let original = scratch[i];
        scratch[i] = original + step;
        let plus = loss(&scratch)?;
        scratch[i] = original - step;
        let minus = loss(&scratch)?;
        scratch[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NumericError(format!(
                "loss is not finite near parameter {i}"
            )));
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}
