//! Integrated Gradients: per-sample feature attribution along the
//! straight-line path from an uninformative baseline to the input.
//!
//! The attribution of feature i is the path integral of the model's
//! input gradient, approximated by an m-step Riemann sum and scaled by
//! `(x_i − x'_i)`. Attributions carry a completeness residual δ, the gap
//! between their sum and `F(x) − F(x')`; it is recorded on every result
//! and drives the choice of m.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Classifier, OutputKind};
use crate::dataio::{Dataset, FeatureSchema, FeatureVec, NUM_FEATURES};

/// Draw count for the random baseline.
pub const RANDOM_BASELINE_DRAWS: usize = 10;

#[derive(Debug, Error)]
pub enum AttribError {
    #[error("model does not provide input gradients (or is in train mode)")]
    GradientUnsupported,
    #[error("step count m must be at least 1")]
    InvalidSteps,
    #[error("sample list is empty")]
    EmptySampleList,
    #[error("step-count grid is empty")]
    EmptyGrid,
    #[error("class {0} absent from the training data, mean baseline undefined")]
    MissingClass(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Zero,
    Mean,
    Random,
}

/// An uninformative starting point for attribution paths: a single vector
/// for the zero and mean kinds, K seeded draws for the random kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub points: Vec<FeatureVec>,
    pub seed: Option<u64>,
    /// Fault-class probability the model assigns to the baseline; logged
    /// for the mean kind, which should sit near 0.5.
    pub prob_at_baseline: Option<f64>,
}

impl Baseline {
    /// Single vector standing for this baseline in reports: the point
    /// itself, or the average of the random draws.
    pub fn representative(&self) -> FeatureVec {
        let mut out = [0.0; NUM_FEATURES];
        for p in &self.points {
            for j in 0..NUM_FEATURES {
                out[j] += p[j];
            }
        }
        for v in &mut out {
            *v /= self.points.len() as f64;
        }
        out
    }

    /// True when the mean baseline landed away from class uncertainty
    /// (|p − 0.5| ≥ 0.2); a diagnostic, not an error.
    pub fn unbalanced(&self) -> bool {
        self.prob_at_baseline
            .is_some_and(|p| (p - 0.5).abs() >= 0.2)
    }
}

/// Construct a baseline from (normalized) training data.
///
/// zero → the zero vector; mean → the equal-weight average of the two
/// class-conditional feature means; random → K draws uniform within the
/// per-feature training range.
pub fn make_baseline(
    kind: BaselineKind,
    train: &Dataset,
    model: &dyn Classifier,
    seed: u64,
) -> Result<Baseline, AttribError> {
    match kind {
        BaselineKind::Zero => Ok(Baseline {
            kind,
            points: vec![[0.0; NUM_FEATURES]],
            seed: None,
            prob_at_baseline: None,
        }),
        BaselineKind::Mean => {
            let mut means = [[0.0f64; NUM_FEATURES]; 2];
            let mut counts = [0usize; 2];
            for s in train.samples() {
                let c = usize::from(s.y);
                counts[c] += 1;
                for j in 0..NUM_FEATURES {
                    means[c][j] += s.x[j];
                }
            }
            for c in 0..2 {
                if counts[c] == 0 {
                    return Err(AttribError::MissingClass(c as u8));
                }
                for v in &mut means[c] {
                    *v /= counts[c] as f64;
                }
            }
            let mut x_prime = [0.0; NUM_FEATURES];
            for j in 0..NUM_FEATURES {
                x_prime[j] = 0.5 * means[0][j] + 0.5 * means[1][j];
            }
            let prob = model.predict_proba(&x_prime);
            Ok(Baseline {
                kind,
                points: vec![x_prime],
                seed: None,
                prob_at_baseline: Some(prob),
            })
        }
        BaselineKind::Random => {
            let mut lo = [f64::INFINITY; NUM_FEATURES];
            let mut hi = [f64::NEG_INFINITY; NUM_FEATURES];
            for s in train.samples() {
                for j in 0..NUM_FEATURES {
                    lo[j] = lo[j].min(s.x[j]);
                    hi[j] = hi[j].max(s.x[j]);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points = (0..RANDOM_BASELINE_DRAWS)
                .map(|_| {
                    let mut p = [0.0; NUM_FEATURES];
                    for j in 0..NUM_FEATURES {
                        p[j] = if hi[j] > lo[j] {
                            rng.gen_range(lo[j]..=hi[j])
                        } else {
                            lo[j]
                        };
                    }
                    p
                })
                .collect();
            Ok(Baseline {
                kind,
                points,
                seed: Some(seed),
                prob_at_baseline: None,
            })
        }
    }
}

/// The m points `x' + (k/m)(x − x')`, k = 1..m. The last point is `x`
/// exactly (copied, not recomputed, so no rounding creeps in).
pub fn interpolate(x: &FeatureVec, x_prime: &FeatureVec, m: usize) -> Vec<FeatureVec> {
    assert!(m >= 1);
    (1..=m)
        .map(|k| {
            if k == m {
                *x
            } else {
                let alpha = k as f64 / m as f64;
                let mut p = [0.0; NUM_FEATURES];
                for j in 0..NUM_FEATURES {
                    p[j] = x_prime[j] + alpha * (x[j] - x_prime[j]);
                }
                p
            }
        })
        .collect()
}

/// Riemann-sum variant. The right-endpoint sum is the default; the
/// midpoint rule is available for δ comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumRule {
    #[default]
    RightEndpoint,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IgOptions {
    pub m: usize,
    pub rule: SumRule,
    /// Which model output F refers to; class probability by default.
    pub output: OutputKind,
}

impl Default for IgOptions {
    fn default() -> Self {
        IgOptions {
            m: 100,
            rule: SumRule::default(),
            output: OutputKind::Probability,
        }
    }
}

/// Per-feature attributions plus the bookkeeping that makes them
/// auditable: the baseline, step count, completeness residual and the
/// model scores at both path endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionResult {
    pub sample_id: Option<usize>,
    pub target_class: usize,
    pub baseline_kind: BaselineKind,
    /// Representative baseline vector (mean of draws for random).
    pub baseline_x: FeatureVec,
    pub x: FeatureVec,
    pub m: usize,
    pub ig: FeatureVec,
    /// `Σ ig − (F(x) − F(x'))`; averaged over draws for random baselines.
    pub delta: f64,
    pub f_x: f64,
    pub f_xprime: f64,
}

impl AttributionResult {
    pub fn with_sample_id(mut self, id: usize) -> Self {
        self.sample_id = Some(id);
        self
    }
}

fn ig_single_path(
    model: &dyn Classifier,
    x: &FeatureVec,
    x_prime: &FeatureVec,
    target: usize,
    opts: &IgOptions,
) -> Result<(FeatureVec, f64, f64, f64), AttribError> {
    let m = opts.m;
    let mut grad_sum = [0.0f64; NUM_FEATURES];
    for k in 1..=m {
        let point = match opts.rule {
            SumRule::RightEndpoint => {
                if k == m {
                    *x
                } else {
                    let alpha = k as f64 / m as f64;
                    let mut p = [0.0; NUM_FEATURES];
                    for j in 0..NUM_FEATURES {
                        p[j] = x_prime[j] + alpha * (x[j] - x_prime[j]);
                    }
                    p
                }
            }
            SumRule::Midpoint => {
                let alpha = (k as f64 - 0.5) / m as f64;
                let mut p = [0.0; NUM_FEATURES];
                for j in 0..NUM_FEATURES {
                    p[j] = x_prime[j] + alpha * (x[j] - x_prime[j]);
                }
                p
            }
        };
        let grad = model
            .input_gradient(&point, target, opts.output)
            .ok_or(AttribError::GradientUnsupported)?;
        for j in 0..NUM_FEATURES {
            grad_sum[j] += grad[j];
        }
    }
    let mut ig = [0.0f64; NUM_FEATURES];
    for j in 0..NUM_FEATURES {
        ig[j] = (x[j] - x_prime[j]) * grad_sum[j] / m as f64;
    }
    let f_x = model.output(x, target, opts.output);
    let f_xprime = model.output(x_prime, target, opts.output);
    let delta = ig.iter().sum::<f64>() - (f_x - f_xprime);
    Ok((ig, delta, f_x, f_xprime))
}

/// Integrated Gradients of `x` against `baseline` for `target`:
/// `ig_i = (x_i − x'_i) · (1/m) Σ_k ∂F/∂x_i` at the interpolation points.
/// For a random baseline the result averages the per-draw attributions
/// and residuals.
pub fn integrated_gradients(
    model: &dyn Classifier,
    x: &FeatureVec,
    baseline: &Baseline,
    target: usize,
    opts: &IgOptions,
) -> Result<AttributionResult, AttribError> {
    if opts.m < 1 {
        return Err(AttribError::InvalidSteps);
    }
    if !model.supports_input_gradient() {
        return Err(AttribError::GradientUnsupported);
    }
    let mut ig = [0.0f64; NUM_FEATURES];
    let mut delta = 0.0;
    let mut f_x = 0.0;
    let mut f_xprime = 0.0;
    for x_prime in &baseline.points {
        let (ig_k, delta_k, fx_k, fxp_k) = ig_single_path(model, x, x_prime, target, opts)?;
        for j in 0..NUM_FEATURES {
            ig[j] += ig_k[j];
        }
        delta += delta_k;
        f_x = fx_k;
        f_xprime += fxp_k;
    }
    let k = baseline.points.len() as f64;
    for v in &mut ig {
        *v /= k;
    }
    Ok(AttributionResult {
        sample_id: None,
        target_class: target,
        baseline_kind: baseline.kind,
        baseline_x: baseline.representative(),
        x: *x,
        m: opts.m,
        ig,
        delta: delta / k,
        f_x,
        f_xprime: f_xprime / k,
    })
}

/// Outcome of the step-count sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectedM {
    pub m: usize,
    /// False when no grid entry met the tolerance and the largest one was
    /// returned instead.
    pub tol_met: bool,
    pub max_delta: f64,
}

/// Smallest m in `m_grid` whose worst-case |δ| over `samples` stays below
/// `delta_tol`; falls back to the largest grid value with `tol_met:
/// false` when none qualifies.
pub fn select_m(
    model: &(dyn Classifier + Sync),
    samples: &[FeatureVec],
    baseline: &Baseline,
    target: usize,
    delta_tol: f64,
    m_grid: &[usize],
) -> Result<SelectedM, AttribError> {
    if samples.is_empty() {
        return Err(AttribError::EmptySampleList);
    }
    if m_grid.is_empty() {
        return Err(AttribError::EmptyGrid);
    }
    let mut last = None;
    for &m in m_grid {
        let opts = IgOptions {
            m,
            ..IgOptions::default()
        };
        let deltas: Vec<f64> = samples
            .par_iter()
            .map(|x| integrated_gradients(model, x, baseline, target, &opts).map(|r| r.delta))
            .collect::<Result<Vec<_>, _>>()?;
        let max_delta = deltas.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
        if max_delta < delta_tol {
            return Ok(SelectedM {
                m,
                tol_met: true,
                max_delta,
            });
        }
        last = Some((m, max_delta));
    }
    let (m, max_delta) = last.unwrap();
    Ok(SelectedM {
        m,
        tol_met: false,
        max_delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    Neutral,
}

/// One bar triplet of the attribution plot: the feature's value, its
/// baseline value and the signed attribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureAttribution {
    pub name: String,
    pub x: f64,
    pub baseline: f64,
    pub ig: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub kind: BaselineKind,
    pub x: Vec<f64>,
}

/// Plot-ready attribution record: features sorted by |ig| descending,
/// positive meaning the feature value supports the target class relative
/// to the baseline, negative meaning it reduces the classifier's
/// confidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionReport {
    pub sample_id: Option<usize>,
    pub target: String,
    pub m: usize,
    pub delta: f64,
    pub baseline: BaselineSummary,
    pub features: Vec<FeatureAttribution>,
}

pub fn attribution_report(result: &AttributionResult, schema: &FeatureSchema) -> AttributionReport {
    let mut features: Vec<FeatureAttribution> = (0..NUM_FEATURES)
        .map(|j| {
            let ig = result.ig[j];
            FeatureAttribution {
                name: schema.name(j).to_string(),
                x: result.x[j],
                baseline: result.baseline_x[j],
                ig,
                direction: if ig > 0.0 {
                    Direction::Positive
                } else if ig < 0.0 {
                    Direction::Negative
                } else {
                    Direction::Neutral
                },
            }
        })
        .collect();
    features.sort_by(|a, b| b.ig.abs().partial_cmp(&a.ig.abs()).unwrap());
    AttributionReport {
        sample_id: result.sample_id,
        target: if result.target_class == 1 {
            "fault".to_string()
        } else {
            "nonfault".to_string()
        },
        m: result.m,
        delta: result.delta,
        baseline: BaselineSummary {
            kind: result.baseline_kind,
            x: result.baseline_x.to_vec(),
        },
        features,
    }
}
