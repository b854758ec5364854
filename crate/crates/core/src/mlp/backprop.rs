//! Reverse-mode differentiation of the block architecture: softmax +
//! cross-entropy, dropout (mask-gated), activation, batch normalization
//! through the batch statistics, and the dense layers. L2 gradients on
//! the dense kernels are included.

use super::{ForwardCache, MlpModel};

/// Parameter gradients, shaped like the model's trainable tensors.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub blocks: Vec<BlockGrads>,
    pub output_w: Vec<f64>,
    pub output_b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockGrads {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Gradient of `model.loss(probs, labels, weights)` with respect to every
/// trainable parameter, given the cache of a train-mode forward on the
/// same batch. Exact up to floating point.
pub fn backward(
    model: &MlpModel,
    cache: &ForwardCache,
    labels: &[u8],
    weights: &[f64],
) -> Gradients {
    let n = cache.n;
    assert_eq!(labels.len(), n);
    assert_eq!(weights.len(), n);
    let sum_w: f64 = weights.iter().sum();
    let lambda = model.config.l2_lambda;

    // Softmax + weighted-mean cross-entropy in one step.
    let mut dlogits = vec![0.0f64; n * 2];
    for r in 0..n {
        let scale = weights[r] / sum_w;
        for k in 0..2 {
            let indicator = if usize::from(labels[r]) == k { 1.0 } else { 0.0 };
            dlogits[r * 2 + k] = scale * (cache.probs[r * 2 + k] - indicator);
        }
    }

    // Output head.
    let head_in: &[f64] = cache
        .blocks
        .last()
        .map(|b| b.out.as_slice())
        .unwrap_or(&cache.input);
    let in_dim = model.output.in_dim;
    let mut output_w = vec![0.0f64; model.output.w.len()];
    let mut output_b = vec![0.0f64; 2];
    let mut dcurrent = vec![0.0f64; n * in_dim];
    for r in 0..n {
        for k in 0..2 {
            let g = dlogits[r * 2 + k];
            output_b[k] += g;
            for i in 0..in_dim {
                output_w[i * 2 + k] += head_in[r * in_dim + i] * g;
                dcurrent[r * in_dim + i] += model.output.w[i * 2 + k] * g;
            }
        }
    }
    if lambda > 0.0 {
        for (g, w) in output_w.iter_mut().zip(&model.output.w) {
            *g += 2.0 * lambda * w;
        }
    }

    // Hidden blocks, last to first.
    let mut block_grads: Vec<BlockGrads> = Vec::with_capacity(model.blocks.len());
    for (idx, (block, bc)) in model.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        let width = block.dense.out_dim;
        let prev_dim = block.dense.in_dim;
        let prev: &[f64] = if idx == 0 {
            &cache.input
        } else {
            &cache.blocks[idx - 1].out
        };

        // Through dropout and the activation.
        let mut dbn_out = vec![0.0f64; n * width];
        for r in 0..n {
            for j in 0..width {
                let i = r * width + j;
                let dact = dcurrent[i] * bc.mask[i];
                dbn_out[i] = dact * model.config.activation.derivative(bc.bn_out[i]);
            }
        }

        // Batch-norm backward through the batch statistics.
        let mut dgamma = vec![0.0f64; width];
        let mut dbeta = vec![0.0f64; width];
        let mut dz = vec![0.0f64; n * width];
        for j in 0..width {
            let inv_std = 1.0 / (bc.batch_var[j] + super::BN_EPS).sqrt();
            let mut sum_d = 0.0;
            let mut sum_dx = 0.0;
            for r in 0..n {
                let i = r * width + j;
                sum_d += dbn_out[i];
                sum_dx += dbn_out[i] * bc.x_hat[i];
            }
            dgamma[j] = sum_dx;
            dbeta[j] = sum_d;
            let g = block.bn.gamma[j];
            let mean_d = sum_d / n as f64;
            let mean_dx = sum_dx / n as f64;
            for r in 0..n {
                let i = r * width + j;
                dz[i] = g * inv_std * (dbn_out[i] - mean_d - bc.x_hat[i] * mean_dx);
            }
        }

        // Dense backward.
        let mut dw = vec![0.0f64; block.dense.w.len()];
        let mut db = vec![0.0f64; width];
        let mut dprev = vec![0.0f64; n * prev_dim];
        for r in 0..n {
            for j in 0..width {
                let g = dz[r * width + j];
                if g == 0.0 {
                    continue;
                }
                db[j] += g;
                for i in 0..prev_dim {
                    dw[i * width + j] += prev[r * prev_dim + i] * g;
                    dprev[r * prev_dim + i] += block.dense.w[i * width + j] * g;
                }
            }
        }
        if lambda > 0.0 {
            for (g, w) in dw.iter_mut().zip(&block.dense.w) {
                *g += 2.0 * lambda * w;
            }
        }

        block_grads.push(BlockGrads {
            w: dw,
            b: db,
            gamma: dgamma,
            beta: dbeta,
        });
        dcurrent = dprev;
    }
    block_grads.reverse();

    Gradients {
        blocks: block_grads,
        output_w,
        output_b,
    }
}
