//! Linear classifiers with class-weighted losses: ridge regression on
//! ±1 targets (closed form), logistic regression (full-batch gradient
//! descent with backtracking line search) and a linear SVM trained by
//! seeded stochastic subgradient descent.
//!
//! All fitters expect feature-normalized training data. The bias is never
//! regularized. Coefficient magnitudes double as the global feature
//! importances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{sigmoid, Classifier, OutputKind};
use crate::dataio::{ClassWeights, Dataset, FeatureVec, NUM_FEATURES};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("normal equations singular even with regularization")]
    SingularSystem,
    #[error("training set is empty")]
    EmptyTrainingSet,
}

/// Which linear objective produced the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Ridge,
    Logistic,
    LinearSvm,
}

/// A fitted linear decision function `score(x) = w · x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub w: FeatureVec,
    pub b: f64,
    pub lambda: f64,
    /// Identifier of the NormStats the model was fitted against, when the
    /// caller tracks one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_stats_id: Option<String>,
}

/// Score, hard label and calibration-free probability for one input.
///
/// Ridge and SVM scores are margin-valued: the "probability" is a
/// documented monotone squash (clipped `(score+1)/2` for ridge, plain
/// `sigmoid(score)` for the SVM), not a calibrated estimate. Logistic
/// probabilities are the model's own sigmoid outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub score: f64,
    pub label: u8,
    pub probability: f64,
}

/// Evaluate the decision function. Label 1 iff the score is strictly
/// positive; a tie goes to the majority class.
pub fn decision(model: &LinearModel, x: &FeatureVec) -> Decision {
    let score = dot(&model.w, x) + model.b;
    let probability = match model.kind {
        LinearKind::Ridge => ((score + 1.0) / 2.0).clamp(0.0, 1.0),
        LinearKind::Logistic | LinearKind::LinearSvm => sigmoid(score),
    };
    Decision {
        score,
        label: u8::from(score > 0.0),
        probability,
    }
}

/// Feature indices ranked by coefficient magnitude, descending; ties keep
/// schema order.
pub fn coefficient_importance(model: &LinearModel) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = model
        .w
        .iter()
        .enumerate()
        .map(|(i, &w)| (i, w.abs()))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked
}

fn dot(w: &FeatureVec, x: &FeatureVec) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

fn targets(train: &Dataset) -> Vec<f64> {
    train
        .samples()
        .iter()
        .map(|s| if s.y == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// Weighted ridge classifier: minimizes
/// `Σ_i ω_i (w·x_i + b − t_i)² + λ‖w‖²` with targets in {−1, +1}, solved
/// in closed form via the weighted normal equations. The bias is
/// unregularized. A single-class training set short-circuits to
/// `w = 0, b = t`.
pub fn fit_ridge(
    train: &Dataset,
    lambda: f64,
    weights: ClassWeights,
) -> Result<LinearModel, FitError> {
    assert!(lambda > 0.0, "lambda must be positive");
    if train.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let t = targets(train);
    if train.n_fault() == 0 || train.n_nonfault() == 0 {
        return Ok(LinearModel {
            kind: LinearKind::Ridge,
            w: [0.0; NUM_FEATURES],
            b: t[0],
            lambda,
            norm_stats_id: None,
        });
    }

    // Augmented system over [w; b], regularizing only the w block.
    const D: usize = NUM_FEATURES + 1;
    let mut a = vec![vec![0.0f64; D]; D];
    let mut rhs = vec![0.0f64; D];
    for (s, &ti) in train.samples().iter().zip(&t) {
        let omega = weights.weight_for(s.y);
        let mut xt = [0.0f64; D];
        xt[..NUM_FEATURES].copy_from_slice(&s.x);
        xt[NUM_FEATURES] = 1.0;
        for r in 0..D {
            let wr = omega * xt[r];
            for c in 0..D {
                a[r][c] += wr * xt[c];
            }
            rhs[r] += wr * ti;
        }
    }
    for j in 0..NUM_FEATURES {
        a[j][j] += lambda;
    }
    let solution = solve_linear_system(&mut a, &mut rhs).ok_or(FitError::SingularSystem)?;
    let mut w = [0.0; NUM_FEATURES];
    w.copy_from_slice(&solution[..NUM_FEATURES]);
    Ok(LinearModel {
        kind: LinearKind::Ridge,
        w,
        b: solution[NUM_FEATURES],
        lambda,
        norm_stats_id: None,
    })
}

/// Gaussian elimination with partial pivoting. Returns `None` when the
/// system is numerically singular.
fn solve_linear_system(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Outcome of a logistic fit, including whether the gradient tolerance
/// was reached and the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearModel,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value before each accepted step, plus the final value.
    pub loss_trace: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Weighted logistic regression: minimizes the class-weighted mean binary
/// cross-entropy plus `(λ/2)‖w‖²` by full-batch gradient descent with
/// backtracking line search. Stops when the gradient ∞-norm drops below
/// `tol`; non-convergence is reported through the flag, not an error.
pub fn fit_logistic(
    train: &Dataset,
    lambda: f64,
    weights: ClassWeights,
    max_iter: usize,
    tol: f64,
) -> Result<LogisticFit, FitError> {
    if train.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let sum_w: f64 = train
        .samples()
        .iter()
        .map(|s| weights.weight_for(s.y))
        .sum();

    let objective = |w: &FeatureVec, b: f64| -> f64 {
        let data: f64 = train
            .samples()
            .iter()
            .map(|s| {
                let z = dot(w, &s.x) + b;
                let ell = if s.y == 1 { softplus(-z) } else { softplus(z) };
                weights.weight_for(s.y) * ell
            })
            .sum();
        data / sum_w + 0.5 * lambda * dot(w, w)
    };
    let gradient = |w: &FeatureVec, b: f64| -> (FeatureVec, f64) {
        let mut gw = [0.0; NUM_FEATURES];
        let mut gb = 0.0;
        for s in train.samples() {
            let z = dot(w, &s.x) + b;
            let residual = weights.weight_for(s.y) * (sigmoid(z) - f64::from(s.y));
            for j in 0..NUM_FEATURES {
                gw[j] += residual * s.x[j];
            }
            gb += residual;
        }
        for (gj, wj) in gw.iter_mut().zip(w.iter()) {
            *gj = *gj / sum_w + lambda * wj;
        }
        (gw, gb / sum_w)
    };

    let mut w = [0.0; NUM_FEATURES];
    let mut b = 0.0;
    let mut loss = objective(&w, b);
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;
    let mut step = 1.0f64;
    for _ in 0..max_iter {
        let (gw, gb) = gradient(&w, b);
        let grad_inf = gw
            .iter()
            .chain(std::iter::once(&gb))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < tol {
            converged = true;
            break;
        }
        let grad_sq = dot(&gw, &gw) + gb * gb;
        // Armijo backtracking, warm-starting from twice the last step.
        step = (step * 2.0).min(1e6);
        let mut accepted = false;
        for _ in 0..60 {
            let mut w_new = w;
            for j in 0..NUM_FEATURES {
                w_new[j] -= step * gw[j];
            }
            let b_new = b - step * gb;
            let loss_new = objective(&w_new, b_new);
            if loss_new <= loss - 1e-4 * step * grad_sq {
                w = w_new;
                b = b_new;
                loss = loss_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        trace.push(loss);
        if !accepted {
            break; // step underflow: no descent possible at fp precision
        }
    }
    Ok(LogisticFit {
        model: LinearModel {
            kind: LinearKind::Logistic,
            w,
            b,
            lambda,
            norm_stats_id: None,
        },
        converged,
        iterations,
        loss_trace: trace,
    })
}

/// Weighted linear SVM: minimizes
/// `(1/2)‖w‖² + C Σ_i ω_i max(0, 1 − t_i(w·x_i + b))` by stochastic
/// subgradient descent with step `1/(λ_eff t)` and suffix averaging over
/// the second half of the iterates. Deterministic for a fixed seed.
pub fn fit_linear_svm(
    train: &Dataset,
    c: f64,
    weights: ClassWeights,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel, FitError> {
    assert!(c > 0.0, "C must be positive");
    if train.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let n = train.len();
    let t = targets(train);
    let sum_w: f64 = train
        .samples()
        .iter()
        .map(|s| weights.weight_for(s.y))
        .sum();
    // Rescale to the Pegasos form (λ_eff/2)‖w‖² + weighted-mean hinge.
    let lambda_eff = 1.0 / (c * sum_w);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = [0.0f64; NUM_FEATURES];
    let mut b = 0.0f64;
    let mut w_avg = [0.0f64; NUM_FEATURES];
    let mut avg_count = 0u64;
    let total_steps = (epochs * n) as u64;
    for step in 1..=total_steps {
        let i = rng.gen_range(0..n);
        let s = &train.samples()[i];
        let eta = 1.0 / (lambda_eff * step as f64);
        // The bias is unregularized, so the strongly-convex 1/(λt)
        // schedule does not apply to it; 1/√t is the standard rate there.
        let eta_b = 1.0 / (step as f64).sqrt();
        let scale = n as f64 * weights.weight_for(s.y) / sum_w;
        let margin = t[i] * (dot(&w, &s.x) + b);
        let shrink = 1.0 - eta * lambda_eff;
        for wj in &mut w {
            *wj *= shrink;
        }
        if margin < 1.0 {
            let coef = eta * scale * t[i];
            for j in 0..NUM_FEATURES {
                w[j] += coef * s.x[j];
            }
            b += eta_b * scale * t[i];
        }
        if step * 2 > total_steps {
            for j in 0..NUM_FEATURES {
                w_avg[j] += w[j];
            }
            avg_count += 1;
        }
    }
    if avg_count > 0 {
        for wj in &mut w_avg {
            *wj /= avg_count as f64;
        }
    } else {
        w_avg = w;
    }
    // Final polish: the bias is unregularized, so its exact 1-D hinge
    // minimizer given the averaged w is cheap to compute and removes the
    // stochastic wander the flat directions would otherwise leave in b.
    let scores: Vec<f64> = train.samples().iter().map(|s| dot(&w_avg, &s.x)).collect();
    let b_opt = optimal_hinge_bias(&scores, &t, train, weights);
    Ok(LinearModel {
        kind: LinearKind::LinearSvm,
        w: w_avg,
        b: b_opt,
        lambda: 1.0 / c,
        norm_stats_id: None,
    })
}

/// Exact minimizer of `b ↦ Σ_i ω_i max(0, 1 − t_i (s_i + b))` for fixed
/// per-sample scores `s_i`. The objective is convex piecewise-linear;
/// sweep the breakpoints until the subgradient crosses zero, taking the
/// midpoint of a flat optimum interval.
pub(crate) fn optimal_hinge_bias(
    scores: &[f64],
    targets: &[f64],
    train: &Dataset,
    weights: ClassWeights,
) -> f64 {
    // Breakpoint of sample i: where its hinge switches on/off, carrying a
    // slope increase of ω_i in both cases.
    let mut breaks: Vec<(f64, f64)> = Vec::with_capacity(scores.len());
    let mut slope = 0.0; // slope at b = −∞
    for ((&s, &t), sample) in scores.iter().zip(targets).zip(train.samples()) {
        let omega = weights.weight_for(sample.y);
        if t > 0.0 {
            // Active for b < 1 − s with slope −ω.
            slope -= omega;
            breaks.push((1.0 - s, omega));
        } else {
            // Active for b > −1 − s with slope +ω.
            breaks.push((-1.0 - s, omega));
        }
    }
    breaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut prev = breaks[0].0;
    for &(at, delta) in &breaks {
        if slope == 0.0 {
            // Flat optimal interval [prev, at]: take its midpoint.
            return (prev + at) / 2.0;
        }
        if slope > 0.0 {
            return prev;
        }
        prev = at;
        slope += delta;
    }
    prev
}

/// Value of the SVM primal objective at (w, b); exposed for tests and
/// search diagnostics.
pub fn svm_objective(
    train: &Dataset,
    weights: ClassWeights,
    c: f64,
    w: &FeatureVec,
    b: f64,
) -> f64 {
    let hinge: f64 = train
        .samples()
        .iter()
        .map(|s| {
            let t = if s.y == 1 { 1.0 } else { -1.0 };
            weights.weight_for(s.y) * (1.0 - t * (dot(w, &s.x) + b)).max(0.0)
        })
        .sum();
    0.5 * dot(w, w) + c * hinge
}

impl Classifier for LinearModel {
    fn predict_proba(&self, x: &FeatureVec) -> f64 {
        decision(self, x).probability
    }

    fn predict(&self, x: &FeatureVec) -> u8 {
        decision(self, x).label
    }

    fn output(&self, x: &FeatureVec, target: usize, kind: OutputKind) -> f64 {
        let d = decision(self, x);
        match kind {
            OutputKind::Probability => {
                if target == 1 {
                    d.probability
                } else {
                    1.0 - d.probability
                }
            }
            OutputKind::Logit => {
                if target == 1 {
                    d.score
                } else {
                    -d.score
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
