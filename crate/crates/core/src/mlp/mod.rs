//! Multi-layer perceptron: L hidden blocks of dense + batch-norm +
//! activation + dropout, a 2-logit dense head and a softmax. Trained with
//! Adam on cross-entropy plus an L2 penalty on the dense kernels; exposes
//! exact input gradients for attribution.
//!
//! Train-mode forward uses batch statistics and seeded dropout masks and
//! is a pure function of (parameters, batch, masks); running-statistic
//! updates are an explicit separate step. Inference-mode forward uses the
//! running statistics, applies no dropout, and is a deterministic pure
//! function of the input alone.

mod adam;
mod backprop;
mod train;

pub use adam::{adam_step, AdamHyper, AdamState, AdamTensor};
pub use backprop::{backward, Gradients};
pub use train::{train, EpochStats, StopReason, TrainLog};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Classifier, OutputKind};
use crate::dataio::{FeatureVec, NUM_FEATURES};

/// Epsilon inside the batch-norm denominator.
pub const BN_EPS: f64 = 1e-5;
/// Probabilities are clamped to this floor before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("train-mode forward needs a batch of at least 2 samples for batch statistics")]
    TrainBatchTooSmall,
    #[error("input gradients are undefined in train mode; switch the model to inference")]
    TrainModeGradient,
    #[error("validation set must contain both classes")]
    ValMissingClass,
    #[error("training set is empty")]
    EmptyTrainingSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Elu,
}

impl Activation {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Elu => {
                if v > 0.0 {
                    v
                } else {
                    v.exp_m1()
                }
            }
        }
    }

    /// Derivative at pre-activation `v`.
    fn derivative(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
            Activation::Elu => {
                if v > 0.0 {
                    1.0
                } else {
                    v.exp()
                }
            }
        }
    }
}

/// Architecture and optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden-block widths; the length is the block count L.
    pub units: Vec<usize>,
    pub activation: Activation,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    /// Initial Adam learning rate.
    pub lr: f64,
    pub batch_size: usize,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(units: Vec<usize>) -> Self {
        MlpConfig {
            units,
            activation: Activation::Relu,
            dropout_p: 0.0,
            l2_lambda: 0.0,
            lr: 1e-3,
            batch_size: 32,
            bn_momentum: 0.9,
            seed: 0,
        }
    }
}

/// Fully connected layer; weights stored flat, `w[i * out_dim + j]` maps
/// input i to unit j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Dense {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
        }
    }

    /// out[r] = x[r] W + b for a row-major batch.
    fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * self.out_dim];
        for r in 0..n {
            let row = &x[r * self.in_dim..(r + 1) * self.in_dim];
            let out_row = &mut out[r * self.out_dim..(r + 1) * self.out_dim];
            out_row.copy_from_slice(&self.b);
            for (i, &xi) in row.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let wrow = &self.w[i * self.out_dim..(i + 1) * self.out_dim];
                for (o, &wij) in out_row.iter_mut().zip(wrow) {
                    *o += xi * wij;
                }
            }
        }
        out
    }
}

/// Per-unit batch normalization with running statistics for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm {
    fn identity(dim: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dense: Dense,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Train,
    #[default]
    Inference,
}

/// The full network. Parameter shapes are fixed by the config; the mode
/// flag selects between batch statistics + dropout (train) and running
/// statistics without dropout (inference).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub blocks: Vec<Block>,
    pub output: Dense,
    #[serde(skip)]
    mode: Mode,
}

/// Per-block multiplicative dropout masks for one batch; entries are 0 or
/// `1/(1-p)` (inverted dropout).
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    pub per_block: Vec<Vec<f64>>,
}

/// Everything the backward pass needs, cached by a train-mode forward.
#[derive(Debug)]
pub struct ForwardCache {
    pub n: usize,
    pub input: Vec<f64>,
    pub blocks: Vec<BlockCache>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug)]
pub struct BlockCache {
    /// Dense output, pre-normalization.
    pub z: Vec<f64>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// γ x̂ + β (the pre-activation).
    pub bn_out: Vec<f64>,
    pub act: Vec<f64>,
    pub mask: Vec<f64>,
    /// Block output after dropout.
    pub out: Vec<f64>,
}

fn softmax_rows(logits: &[f64], n: usize) -> Vec<f64> {
    let mut probs = vec![0.0; n * 2];
    for r in 0..n {
        let l0 = logits[r * 2];
        let l1 = logits[r * 2 + 1];
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        let z = e0 + e1;
        probs[r * 2] = e0 / z;
        probs[r * 2 + 1] = e1 / z;
    }
    probs
}

impl MlpModel {
    /// Fresh model with Glorot-uniform dense kernels drawn from `rng`;
    /// batch-norm starts as the identity transform.
    pub fn init(config: MlpConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::with_capacity(config.units.len());
        let mut in_dim = NUM_FEATURES;
        for &width in &config.units {
            assert!(width >= 1, "block widths must be at least 1");
            blocks.push(Block {
                dense: Dense::glorot(in_dim, width, rng),
                bn: BatchNorm::identity(width),
            });
            in_dim = width;
        }
        let output = Dense::glorot(in_dim, 2, rng);
        MlpModel {
            config,
            blocks,
            output,
            mode: Mode::Inference,
        }
    }

    pub fn new(config: MlpConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init(config, &mut rng)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    /// Draw one batch worth of dropout masks from `rng`.
    pub fn sample_dropout_masks(&self, n: usize, rng: &mut ChaCha8Rng) -> DropoutMasks {
        let p = self.config.dropout_p;
        let per_block = self
            .blocks
            .iter()
            .map(|block| {
                let width = block.dense.out_dim;
                if p == 0.0 {
                    vec![1.0; n * width]
                } else {
                    let keep = 1.0 / (1.0 - p);
                    (0..n * width)
                        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
                        .collect()
                }
            })
            .collect();
        DropoutMasks { per_block }
    }

    /// Train-mode forward with batch statistics and the given dropout
    /// masks. Pure: running statistics are not touched (see
    /// [`MlpModel::update_running_stats`]).
    pub fn forward_train(
        &self,
        batch: &[FeatureVec],
        masks: &DropoutMasks,
    ) -> Result<ForwardCache, MlpError> {
        let n = batch.len();
        if n < 2 {
            return Err(MlpError::TrainBatchTooSmall);
        }
        let mut current: Vec<f64> = batch.iter().flatten().copied().collect();
        let input = current.clone();
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for (block, mask) in self.blocks.iter().zip(&masks.per_block) {
            let width = block.dense.out_dim;
            let z = block.dense.forward(&current, n);
            let mut batch_mean = vec![0.0; width];
            for r in 0..n {
                for j in 0..width {
                    batch_mean[j] += z[r * width + j];
                }
            }
            for m in &mut batch_mean {
                *m /= n as f64;
            }
            let mut batch_var = vec![0.0; width];
            for r in 0..n {
                for j in 0..width {
                    let d = z[r * width + j] - batch_mean[j];
                    batch_var[j] += d * d;
                }
            }
            for v in &mut batch_var {
                *v /= n as f64;
            }
            let mut x_hat = vec![0.0; n * width];
            let mut bn_out = vec![0.0; n * width];
            let mut act = vec![0.0; n * width];
            let mut out = vec![0.0; n * width];
            for j in 0..width {
                let inv_std = 1.0 / (batch_var[j] + BN_EPS).sqrt();
                for r in 0..n {
                    let idx = r * width + j;
                    let xh = (z[idx] - batch_mean[j]) * inv_std;
                    x_hat[idx] = xh;
                    let pre = block.bn.gamma[j] * xh + block.bn.beta[j];
                    bn_out[idx] = pre;
                    let a = self.config.activation.apply(pre);
                    act[idx] = a;
                    out[idx] = a * mask[idx];
                }
            }
            current = out.clone();
            block_caches.push(BlockCache {
                z,
                batch_mean,
                batch_var,
                x_hat,
                bn_out,
                act,
                mask: mask.clone(),
                out,
            });
        }
        let logits = self.output.forward(&current, n);
        let probs = softmax_rows(&logits, n);
        Ok(ForwardCache {
            n,
            input,
            blocks: block_caches,
            logits,
            probs,
        })
    }

    /// Fold one batch's statistics into the running estimates:
    /// `μ ← m·μ + (1−m)·μ_batch` with momentum `m`.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let m = self.config.bn_momentum;
        for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks) {
            for j in 0..block.dense.out_dim {
                block.bn.running_mean[j] =
                    m * block.bn.running_mean[j] + (1.0 - m) * bc.batch_mean[j];
                block.bn.running_var[j] =
                    m * block.bn.running_var[j] + (1.0 - m) * bc.batch_var[j];
            }
        }
    }

    /// Inference-mode forward: running statistics, no dropout. Returns
    /// (logits, probs), each n×2 row-major.
    pub fn forward_inference(&self, batch: &[FeatureVec]) -> (Vec<f64>, Vec<f64>) {
        let n = batch.len();
        let mut current: Vec<f64> = batch.iter().flatten().copied().collect();
        for block in &self.blocks {
            let width = block.dense.out_dim;
            let z = block.dense.forward(&current, n);
            let mut out = vec![0.0; n * width];
            for j in 0..width {
                let inv_std = 1.0 / (block.bn.running_var[j] + BN_EPS).sqrt();
                let slope = block.bn.gamma[j] * inv_std;
                let shift = block.bn.beta[j] - block.bn.running_mean[j] * slope;
                for r in 0..n {
                    let idx = r * width + j;
                    out[idx] = self.config.activation.apply(slope * z[idx] + shift);
                }
            }
            current = out;
        }
        let logits = self.output.forward(&current, n);
        let probs = softmax_rows(&logits, n);
        (logits, probs)
    }

    /// Class probabilities for a single input.
    pub fn predict_row(&self, x: &FeatureVec) -> [f64; 2] {
        let (_, probs) = self.forward_inference(std::slice::from_ref(x));
        [probs[0], probs[1]]
    }

    /// `λ Σ ‖W‖²` over the dense kernels (hidden and output); biases and
    /// batch-norm scale/shift are not penalized.
    pub fn l2_penalty(&self) -> f64 {
        if self.config.l2_lambda == 0.0 {
            return 0.0;
        }
        let mut sq = 0.0;
        for block in &self.blocks {
            sq += block.dense.w.iter().map(|w| w * w).sum::<f64>();
        }
        sq += self.output.w.iter().map(|w| w * w).sum::<f64>();
        self.config.l2_lambda * sq
    }

    /// Weighted-mean cross-entropy of `probs` against `labels` plus the
    /// L2 penalty.
    pub fn loss(&self, probs: &[f64], labels: &[u8], weights: &[f64]) -> f64 {
        cross_entropy(probs, labels, weights) + self.l2_penalty()
    }

    /// Exact gradient of the selected output (softmax probability of
    /// `target`, or its raw logit) with respect to the 12 inputs.
    /// Inference mode only.
    pub fn input_gradient(
        &self,
        x: &FeatureVec,
        target: usize,
        of: OutputKind,
    ) -> Result<FeatureVec, MlpError> {
        if self.mode == Mode::Train {
            return Err(MlpError::TrainModeGradient);
        }
        assert!(target < 2);
        // Forward pass, caching pre-activations per block.
        let mut current: Vec<f64> = x.to_vec();
        let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let width = block.dense.out_dim;
            let z = block.dense.forward(&current, 1);
            let mut pre = vec![0.0; width];
            let mut out = vec![0.0; width];
            for j in 0..width {
                let inv_std = 1.0 / (block.bn.running_var[j] + BN_EPS).sqrt();
                let slope = block.bn.gamma[j] * inv_std;
                let p = slope * (z[j] - block.bn.running_mean[j]) + block.bn.beta[j];
                pre[j] = p;
                out[j] = self.config.activation.apply(p);
            }
            pre_acts.push(pre);
            current = out;
        }
        let logits = self.output.forward(&current, 1);
        let probs = softmax_rows(&logits, 1);

        // Seed gradient at the logits.
        let mut dlogits = [0.0f64; 2];
        match of {
            OutputKind::Logit => dlogits[target] = 1.0,
            OutputKind::Probability => {
                let pt = probs[target];
                for (k, d) in dlogits.iter_mut().enumerate() {
                    let delta = if k == target { 1.0 } else { 0.0 };
                    *d = pt * (delta - probs[k]);
                }
            }
        }

        // Output dense transpose.
        let mut grad: Vec<f64> = vec![0.0; self.output.in_dim];
        for (i, g) in grad.iter_mut().enumerate() {
            for k in 0..2 {
                *g += self.output.w[i * 2 + k] * dlogits[k];
            }
        }
        // Blocks in reverse.
        for (block, pre) in self.blocks.iter().zip(&pre_acts).rev() {
            let width = block.dense.out_dim;
            let mut dz = vec![0.0; width];
            for j in 0..width {
                let act_d = self.config.activation.derivative(pre[j]);
                let inv_std = 1.0 / (block.bn.running_var[j] + BN_EPS).sqrt();
                dz[j] = grad[j] * act_d * block.bn.gamma[j] * inv_std;
            }
            let mut dprev = vec![0.0; block.dense.in_dim];
            for (i, d) in dprev.iter_mut().enumerate() {
                let wrow = &block.dense.w[i * width..(i + 1) * width];
                *d = wrow.iter().zip(&dz).map(|(w, g)| w * g).sum();
            }
            grad = dprev;
        }
        let mut out = [0.0; NUM_FEATURES];
        out.copy_from_slice(&grad);
        Ok(out)
    }
}

/// Weighted mean of `−ln p_label` over the batch; probabilities are
/// clamped to `PROB_FLOOR` before the log.
pub fn cross_entropy(probs: &[f64], labels: &[u8], weights: &[f64]) -> f64 {
    let n = labels.len();
    assert_eq!(probs.len(), n * 2);
    assert_eq!(weights.len(), n);
    let sum_w: f64 = weights.iter().sum();
    let mut total = 0.0;
    for (r, (&y, &w)) in labels.iter().zip(weights).enumerate() {
        let p = probs[r * 2 + usize::from(y)].max(PROB_FLOOR);
        total += -w * p.ln();
    }
    total / sum_w
}

impl Classifier for MlpModel {
    fn predict_proba(&self, x: &FeatureVec) -> f64 {
        self.predict_row(x)[1]
    }

    fn output(&self, x: &FeatureVec, target: usize, kind: OutputKind) -> f64 {
        let (logits, probs) = self.forward_inference(std::slice::from_ref(x));
        match kind {
            OutputKind::Probability => probs[target],
            OutputKind::Logit => logits[target],
        }
    }

    fn supports_input_gradient(&self) -> bool {
        self.mode == Mode::Inference
    }

    fn input_gradient(
        &self,
        x: &FeatureVec,
        target: usize,
        kind: OutputKind,
    ) -> Option<FeatureVec> {
        MlpModel::input_gradient(self, x, target, kind).ok()
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Deterministic RNG for tests.
    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Random batch of feature vectors in [-2, 2].
    pub fn random_batch(n: usize, rng: &mut ChaCha8Rng) -> Vec<FeatureVec> {
        (0..n)
            .map(|_| {
                let mut x = [0.0; NUM_FEATURES];
                for v in &mut x {
                    *v = rng.gen_range(-2.0..2.0);
                }
                x
            })
            .collect()
    }

    /// Model with randomized batch-norm state and biases so gradient
    /// checks exercise every code path.
    pub fn randomized_model(config: MlpConfig, seed: u64) -> MlpModel {
        let mut rng = rng(seed);
        let mut model = MlpModel::init(config, &mut rng);
        for block in &mut model.blocks {
            for g in &mut block.bn.gamma {
                *g = rng.gen_range(0.5..1.5);
            }
            for b in &mut block.bn.beta {
                *b = rng.gen_range(-0.3..0.3);
            }
            for m in &mut block.bn.running_mean {
                *m = rng.gen_range(-0.5..0.5);
            }
            for v in &mut block.bn.running_var {
                *v = rng.gen_range(0.5..2.0);
            }
            for b in &mut block.dense.b {
                *b = rng.gen_range(-0.2..0.2);
            }
        }
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use test_support::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = rng(3);
        let model = MlpModel::new(MlpConfig::new(vec![16, 8]));
        let batch = random_batch(9, &mut rng);
        let (_, probs) = model.forward_inference(&batch);
        for r in 0..batch.len() {
            let sum = probs[r * 2] + probs[r * 2 + 1];
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_output_weights_predict_half() {
        let mut model = MlpModel::new(MlpConfig::new(vec![]));
        model.output.w.iter_mut().for_each(|w| *w = 0.0);
        let p = model.predict_row(&[1.0; NUM_FEATURES]);
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn hand_forward_identity_block() {
        // Identity dense 12→12, identity-ish BN (μ=0, σ²=1, γ=1, β=0),
        // relu: input (1, −1, 0, …) maps to (1, 0, 0, …) up to BN_EPS.
        let mut model = MlpModel::new(MlpConfig::new(vec![NUM_FEATURES]));
        let block = &mut model.blocks[0];
        for w in &mut block.dense.w {
            *w = 0.0;
        }
        for i in 0..NUM_FEATURES {
            block.dense.w[i * NUM_FEATURES + i] = 1.0;
        }
        block.dense.b.iter_mut().for_each(|b| *b = 0.0);
        // Read the block output through an identity-like head: copy unit
        // activations into logit 1, keep logit 0 at zero.
        let mut x = [0.0; NUM_FEATURES];
        x[0] = 1.0;
        x[1] = -1.0;

        // Probe each unit's activation by a one-hot output head.
        for (unit, want) in [(0usize, 1.0f64), (1, 0.0), (2, 0.0)] {
            let mut probe = model.clone();
            probe.output.w.iter_mut().for_each(|w| *w = 0.0);
            probe.output.b.iter_mut().for_each(|b| *b = 0.0);
            probe.output.w[unit * 2 + 1] = 1.0;
            let (logits, _) = probe.forward_inference(std::slice::from_ref(&x));
            assert!(
                (logits[1] - want).abs() < 1e-4,
                "unit {unit}: got {} want {want}",
                logits[1]
            );
        }
    }

    #[test]
    fn train_mode_rejects_singleton_batch() {
        let model = MlpModel::new(MlpConfig::new(vec![4]));
        let mut r = rng(0);
        let batch = random_batch(1, &mut r);
        let masks = model.sample_dropout_masks(1, &mut r);
        assert!(matches!(
            model.forward_train(&batch, &masks),
            Err(MlpError::TrainBatchTooSmall)
        ));
    }

    #[test]
    fn train_mode_batch_stats_are_normalized() {
        let config = MlpConfig::new(vec![10, 6]);
        let model = randomized_model(config, 4);
        let mut r = rng(8);
        let batch = random_batch(32, &mut r);
        let masks = model.sample_dropout_masks(32, &mut r);
        let cache = model.forward_train(&batch, &masks).unwrap();
        for bc in &cache.blocks {
            let width = bc.batch_mean.len();
            for j in 0..width {
                let mut mean = 0.0;
                let mut var = 0.0;
                for r in 0..cache.n {
                    mean += bc.x_hat[r * width + j];
                }
                mean /= cache.n as f64;
                for r in 0..cache.n {
                    let d = bc.x_hat[r * width + j] - mean;
                    var += d * d;
                }
                var /= cache.n as f64;
                assert!(mean.abs() < 1e-6, "unit {j} mean {mean}");
                assert!((var - 1.0).abs() < 1e-4, "unit {j} var {var}");
            }
        }
    }

    #[test]
    fn inference_is_pure_and_batch_independent() {
        let model = randomized_model(MlpConfig::new(vec![8, 8]), 11);
        let mut r = rng(2);
        let batch = random_batch(5, &mut r);
        let (_, probs_batch) = model.forward_inference(&batch);
        for (i, x) in batch.iter().enumerate() {
            let p = model.predict_row(x);
            assert_eq!(p[0], probs_batch[i * 2]);
            assert_eq!(p[1], probs_batch[i * 2 + 1]);
        }
    }

    #[test]
    fn cross_entropy_hand_values() {
        // Uniform prediction, true label 1: ln 2.
        let ce = cross_entropy(&[0.5, 0.5], &[1], &[1.0]);
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        // Perfect prediction: 0.
        let ce = cross_entropy(&[0.0, 1.0], &[1], &[1.0]);
        assert!(ce.abs() < 1e-10);
    }

    #[test]
    fn l2_penalty_hand_value() {
        // One weight matrix with squared Frobenius norm 4 and λ = 0.1
        // adds 0.4 to the loss.
        let mut config = MlpConfig::new(vec![]);
        config.l2_lambda = 0.1;
        let mut model = MlpModel::new(config);
        model.output.w = vec![1.0, 1.0, 1.0, 1.0]; // 12→2 trimmed below
        model.output.in_dim = 2;
        let sq: f64 = model.output.w.iter().map(|w| w * w).sum();
        assert_eq!(sq, 4.0);
        assert!((model.l2_penalty() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn probability_gradients_of_both_classes_cancel() {
        let model = randomized_model(MlpConfig::new(vec![12, 6]), 21);
        let mut r = rng(22);
        for x in random_batch(6, &mut r) {
            let g0 = model.input_gradient(&x, 0, OutputKind::Probability).unwrap();
            let g1 = model.input_gradient(&x, 1, OutputKind::Probability).unwrap();
            for j in 0..NUM_FEATURES {
                assert!((g0[j] + g1[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn logit_gradient_of_linear_head_is_the_weight_row() {
        let model = MlpModel::new(MlpConfig::new(vec![]));
        let mut r = rng(30);
        for x in random_batch(4, &mut r) {
            let g = model.input_gradient(&x, 1, OutputKind::Logit).unwrap();
            for i in 0..NUM_FEATURES {
                assert_eq!(g[i], model.output.w[i * 2 + 1]);
            }
        }
    }

    #[test]
    fn disconnected_feature_has_zero_gradient() {
        let mut model = MlpModel::new(MlpConfig::new(vec![7]));
        // Cut every outgoing weight of feature 3.
        let width = model.blocks[0].dense.out_dim;
        for j in 0..width {
            model.blocks[0].dense.w[3 * width + j] = 0.0;
        }
        let mut r = rng(31);
        for x in random_batch(4, &mut r) {
            let g = model.input_gradient(&x, 1, OutputKind::Probability).unwrap();
            assert_eq!(g[3], 0.0);
        }
    }

    #[test]
    fn gradient_requires_inference_mode() {
        let mut model = MlpModel::new(MlpConfig::new(vec![4]));
        model.set_mode(Mode::Train);
        let x = [0.0; NUM_FEATURES];
        assert!(matches!(
            model.input_gradient(&x, 1, OutputKind::Probability),
            Err(MlpError::TrainModeGradient)
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let model = randomized_model(MlpConfig::new(vec![5, 3]), 77);
        let json = serde_json::to_string(&model).unwrap();
        let back: MlpModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        // Shape headers present alongside the flat arrays.
        assert!(json.contains("\"in_dim\":12"));
        assert!(json.contains("\"out_dim\":5"));
    }
}
