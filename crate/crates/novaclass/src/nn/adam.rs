//! Adam optimizer.

use crate::scalar::Real;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub t: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            t: 0,
        }
    }
}

/// Applies one Adam update in place:
/// `m ← β₁m + (1-β₁)g`, `v ← β₂v + (1-β₂)g²`, then
/// `θ ← θ − lr·m̂/(√v̂ + ε)` with bias-corrected moments.
pub fn adam_step<F: Real>(
    params: &mut [F],
    grads: &[F],
    state: &mut AdamState<F>,
    hyper: &AdamHyper,
) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let b1 = F::of(hyper.beta1);
    let b2 = F::of(hyper.beta2);
    let one_m_b1 = F::of(1.0 - hyper.beta1);
    let one_m_b2 = F::of(1.0 - hyper.beta2);
    let corr1 = F::of(1.0 - hyper.beta1.powi(t));
    let corr2 = F::of(1.0 - hyper.beta2.powi(t));
    let lr = F::of(hyper.lr);
    let eps = F::of(hyper.eps);

    for i in 0..params.len() {
        let g = grads[i];
        let m = b1 * state.m[i] + one_m_b1 * g;
        let v = b2 * state.v[i] + one_m_b2 * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / corr1;
        let v_hat = v / corr2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}
