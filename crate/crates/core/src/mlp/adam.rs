//! Adam with bias correction, applied tensor-by-tensor.

use super::{Gradients, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamTensor {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamTensor {
    pub fn zeros(len: usize) -> Self {
        AdamTensor {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// Optimizer state for a whole model: one moment pair per tensor, in the
/// fixed order (per block: dense w, dense b, γ, β), then output w, b.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub tensors: Vec<AdamTensor>,
    pub t: u64,
}

impl AdamState {
    pub fn for_model(model: &MlpModel) -> Self {
        let mut tensors = Vec::new();
        for block in &model.blocks {
            tensors.push(AdamTensor::zeros(block.dense.w.len()));
            tensors.push(AdamTensor::zeros(block.dense.b.len()));
            tensors.push(AdamTensor::zeros(block.bn.gamma.len()));
            tensors.push(AdamTensor::zeros(block.bn.beta.len()));
        }
        tensors.push(AdamTensor::zeros(model.output.w.len()));
        tensors.push(AdamTensor::zeros(model.output.b.len()));
        AdamState { tensors, t: 0 }
    }
}

/// One bias-corrected Adam update of `params` in place:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamTensor,
    lr: f64,
    hyper: &AdamHyper,
    t: u64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    assert!(t >= 1, "Adam step counter starts at 1");
    let bc1 = 1.0 - hyper.beta1.powi(t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

/// Advance the step counter and update every tensor of `model` from
/// `grads`.
pub fn apply_adam(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    hyper: &AdamHyper,
) {
    state.t += 1;
    let t = state.t;
    let mut cursor = state.tensors.iter_mut();
    for (block, bg) in model.blocks.iter_mut().zip(&grads.blocks) {
        adam_step(&mut block.dense.w, &bg.w, cursor.next().unwrap(), lr, hyper, t);
        adam_step(&mut block.dense.b, &bg.b, cursor.next().unwrap(), lr, hyper, t);
        adam_step(&mut block.bn.gamma, &bg.gamma, cursor.next().unwrap(), lr, hyper, t);
        adam_step(&mut block.bn.beta, &bg.beta, cursor.next().unwrap(), lr, hyper, t);
    }
    adam_step(
        &mut model.output.w,
        &grads.output_w,
        cursor.next().unwrap(),
        lr,
        hyper,
        t,
    );
    adam_step(
        &mut model.output.b,
        &grads.output_b,
        cursor.next().unwrap(),
        lr,
        hyper,
        t,
    );
}
