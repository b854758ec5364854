//! RBF-kernel SVM with class-weighted hinge loss, trained by kernelized
//! stochastic subgradient descent (no SMO).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{sigmoid, Classifier, OutputKind};
use crate::dataio::{ClassWeights, Dataset, FeatureVec};
use crate::linmod::FitError;

/// `k(a, b) = exp(−γ ‖a − b‖²)`; symmetric, in (0, 1].
pub fn rbf_kernel(a: &FeatureVec, b: &FeatureVec, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    let sq: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(ai, bi)| (ai - bi) * (ai - bi))
        .sum();
    (-gamma * sq).exp()
}

/// The "scale" default width: `1 / (n_features · var)` where `var` is the
/// population variance of all feature entries of `train` pooled together.
pub fn gamma_scale(train: &Dataset) -> f64 {
    let n = (train.len() * 12) as f64;
    let mut mean = 0.0;
    for s in train.samples() {
        mean += s.x.iter().sum::<f64>();
    }
    mean /= n;
    let mut var = 0.0;
    for s in train.samples() {
        var += s.x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    var /= n;
    if var > 0.0 {
        1.0 / (12.0 * var)
    } else {
        1.0
    }
}

/// A fitted kernel machine: `score(x) = Σ_j α_j k(s_j, x) + b`.
///
/// The `alpha` coefficients are signed and already absorb the label and
/// class-weight factors accumulated during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub b: f64,
    pub support: Vec<FeatureVec>,
    pub alpha: Vec<f64>,
}

/// Score and hard label for one input; label 1 iff the score is strictly
/// positive.
pub fn kernel_decision(model: &KernelModel, x: &FeatureVec) -> (f64, u8) {
    let score: f64 = model
        .support
        .iter()
        .zip(&model.alpha)
        .map(|(s, &a)| a * rbf_kernel(s, x, model.gamma))
        .sum::<f64>()
        + model.b;
    (score, u8::from(score > 0.0))
}

/// Train the RBF SVM on the class-weighted hinge objective
/// `(1/2)‖w‖²_H + C Σ_i ω_i max(0, 1 − t_i f(x_i))` via kernelized
/// stochastic subgradient descent with step `1/(λ_eff t)` and suffix
/// averaging. Coefficients below 1e−10 in magnitude are pruned at the
/// end. Deterministic per seed.
pub fn fit_rbf_svm(
    train: &Dataset,
    c: f64,
    gamma: f64,
    weights: ClassWeights,
    epochs: usize,
    seed: u64,
) -> Result<KernelModel, FitError> {
    assert!(c > 0.0 && gamma > 0.0);
    if train.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let n = train.len();
    let t: Vec<f64> = train
        .samples()
        .iter()
        .map(|s| if s.y == 1 { 1.0 } else { -1.0 })
        .collect();
    let sum_w: f64 = train
        .samples()
        .iter()
        .map(|s| weights.weight_for(s.y))
        .sum();
    let lambda_eff = 1.0 / (c * sum_w);

    // Precompute the Gram matrix; at the dataset sizes this crate targets
    // (a few thousand rows) the n² storage is cheap and dominates runtime
    // savings in the inner loop.
    let mut gram = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf_kernel(&train.samples()[i].x, &train.samples()[j].x, gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta = vec![0.0f64; n];
    let mut b = 0.0f64;
    let mut beta_avg = vec![0.0f64; n];
    let mut avg_count = 0u64;
    let total_steps = (epochs * n) as u64;
    for step in 1..=total_steps {
        let i = rng.gen_range(0..n);
        let eta = 1.0 / (lambda_eff * step as f64);
        // 1/√t for the unregularized bias, as in the linear fitter.
        let eta_b = 1.0 / (step as f64).sqrt();
        let scale = n as f64 * weights.weight_for(train.samples()[i].y) / sum_w;
        let row = &gram[i * n..(i + 1) * n];
        let f_i: f64 = beta
            .iter()
            .zip(row)
            .map(|(&bj, &kij)| bj * kij)
            .sum::<f64>()
            + b;
        let shrink = 1.0 - eta * lambda_eff;
        for bj in &mut beta {
            *bj *= shrink;
        }
        if t[i] * f_i < 1.0 {
            beta[i] += eta * scale * t[i];
            b += eta_b * scale * t[i];
        }
        if step * 2 > total_steps {
            for (acc, &bj) in beta_avg.iter_mut().zip(&beta) {
                *acc += bj;
            }
            avg_count += 1;
        }
    }
    if avg_count > 0 {
        for acc in &mut beta_avg {
            *acc /= avg_count as f64;
        }
    } else {
        beta_avg = beta;
    }

    // Exact 1-D bias given the averaged coefficients (see linmod).
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            beta_avg
                .iter()
                .zip(&gram[i * n..(i + 1) * n])
                .map(|(&bj, &kij)| bj * kij)
                .sum()
        })
        .collect();
    let b_opt = crate::linmod::optimal_hinge_bias(&scores, &t, train, weights);

    let mut support = Vec::new();
    let mut alpha = Vec::new();
    for (i, &coef) in beta_avg.iter().enumerate() {
        if coef.abs() >= 1e-10 {
            support.push(train.samples()[i].x);
            alpha.push(coef);
        }
    }
    Ok(KernelModel {
        gamma,
        c,
        b: b_opt,
        support,
        alpha,
    })
}

impl Classifier for KernelModel {
    fn predict_proba(&self, x: &FeatureVec) -> f64 {
        sigmoid(kernel_decision(self, x).0)
    }

    fn predict(&self, x: &FeatureVec) -> u8 {
        kernel_decision(self, x).1
    }

    fn output(&self, x: &FeatureVec, target: usize, kind: OutputKind) -> f64 {
        let (score, _) = kernel_decision(self, x);
        match kind {
            OutputKind::Probability => {
                let p = sigmoid(score);
                if target == 1 {
                    p
                } else {
                    1.0 - p
                }
            }
            OutputKind::Logit => {
                if target == 1 {
                    score
                } else {
                    -score
                }
            }
        }
    }

    fn input_gradient(
        &self,
        _x: &FeatureVec,
        _target: usize,
        _kind: OutputKind,
    ) -> Option<FeatureVec> {
        None
    }
}
