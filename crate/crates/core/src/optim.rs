//! Adam optimizer over the policy's parameter blocks.

use crate::policy::{GradBuffer, ParamBlock, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the update counter. Moments
/// reuse the parameter layout so they serialize the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: GradBuffer,
    pub v: GradBuffer,
}

impl AdamState {
    pub fn zeros(d: usize, v: usize) -> Self {
        Self {
            step: 0,
            m: GradBuffer::zeros(d, v),
            v: GradBuffer::zeros(d, v),
        }
    }
}

/// One Adam update with bias correction. The result is a pure
/// function of the incoming parameters, gradients, state, and
/// hyper-parameters; `params` and `state` are modified in place.
pub fn adam_step(
    params: &mut PolicyParams,
    grads: &GradBuffer,
    state: &mut AdamState,
    hyper: &AdamHyper,
) {
    assert_eq!((params.d, params.v), (grads.d, grads.v), "gradient shape mismatch");
    assert_eq!((params.d, params.v), (state.m.d, state.m.v), "state shape mismatch");
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for block in ParamBlock::ALL {
        let g = grads.block(block);
        let m = state.m.block_mut(block);
        for (mi, &gi) in m.iter_mut().zip(g) {
            *mi = hyper.beta1 * *mi + (1.0 - hyper.beta1) * gi;
        }
        let v = state.v.block_mut(block);
        for (vi, &gi) in v.iter_mut().zip(g) {
            *vi = hyper.beta2 * *vi + (1.0 - hyper.beta2) * gi * gi;
        }
        let p = params.block_mut(block);
        let m = state.m.block(block);
        let v = state.v.block(block);
        for i in 0..p.len() {
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
}
