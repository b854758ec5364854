//! Hyperparameter selection: exhaustive grid search for the linear and
//! kernel models, seeded random search for the MLP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dataio::{class_weights, Dataset, FeatureVec};
use crate::kernsvm::{fit_rbf_svm, gamma_scale, KernelModel};
use crate::linmod::{fit_linear_svm, fit_logistic, fit_ridge, LinearModel};
use crate::mlp::{train, Activation, MlpConfig, MlpModel};

use super::metrics::{confusion, weighted_f1_of, ConfusionMatrix};
use super::EvalError;

/// The five classifier families under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Logistic,
    LinearSvm,
    RbfSvm,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Logistic => "logistic",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::RbfSvm => "rbf_svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ridge" => Ok(ModelKind::Ridge),
            "logistic" => Ok(ModelKind::Logistic),
            "linear_svm" | "linear-svm" => Ok(ModelKind::LinearSvm),
            "rbf_svm" | "rbf-svm" => Ok(ModelKind::RbfSvm),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

/// RBF width choice: the data-driven "scale" default or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpec {
    Scale,
    Fixed(f64),
}

impl GammaSpec {
    pub fn resolve(&self, train: &Dataset) -> f64 {
        match self {
            GammaSpec::Scale => gamma_scale(train),
            GammaSpec::Fixed(g) => *g,
        }
    }
}

/// Random-search ranges for the MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSearchSpace {
    pub layer_counts: Vec<usize>,
    pub unit_choices: Vec<usize>,
    /// Log-uniform L2 strength range.
    pub lambda_range: (f64, f64),
    pub dropout_range: (f64, f64),
    /// Log-uniform learning-rate range.
    pub lr_range: (f64, f64),
    pub activations: Vec<Activation>,
}

/// Search ranges for every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub mlp: MlpSearchSpace,
    /// λ (ridge/logistic) or C (linear SVM) grid.
    pub linear_lambda_grid: Vec<f64>,
    pub rbf_c_grid: Vec<f64>,
    pub rbf_gamma_grid: Vec<GammaSpec>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        // 7-point log grid 1e-4 .. 1e2.
        let log_grid: Vec<f64> = (-4..=2).map(|e| 10f64.powi(e)).collect();
        SearchSpace {
            mlp: MlpSearchSpace {
                layer_counts: vec![1, 2, 3],
                unit_choices: vec![8, 16, 32, 64],
                lambda_range: (1e-5, 1e-1),
                dropout_range: (0.0, 0.5),
                lr_range: (1e-4, 1e-2),
                activations: vec![Activation::Relu, Activation::Tanh, Activation::Elu],
            },
            linear_lambda_grid: log_grid.clone(),
            rbf_c_grid: log_grid,
            rbf_gamma_grid: vec![
                GammaSpec::Scale,
                GammaSpec::Fixed(0.01),
                GammaSpec::Fixed(0.1),
                GammaSpec::Fixed(1.0),
            ],
        }
    }
}

/// Iteration budgets for the individual fitters; search and
/// cross-validation thread these through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBudget {
    pub svm_epochs: usize,
    pub logistic_max_iter: usize,
    pub logistic_tol: f64,
    pub mlp_max_epochs: usize,
}

impl Default for FitBudget {
    fn default() -> Self {
        FitBudget {
            svm_epochs: 60,
            logistic_max_iter: 800,
            logistic_tol: 1e-7,
            mlp_max_epochs: 500,
        }
    }
}

/// Hyperparameters chosen by a search, serializable into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparams {
    /// λ for ridge/logistic, C for the linear SVM.
    Linear { lambda: f64 },
    Rbf { c: f64, gamma: f64 },
    Mlp(MlpConfig),
}

/// An owned fitted model of any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnyModel {
    Linear(LinearModel),
    Kernel(KernelModel),
    Mlp(MlpModel),
}

impl AnyModel {
    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            AnyModel::Linear(m) => m,
            AnyModel::Kernel(m) => m,
            AnyModel::Mlp(m) => m,
        }
    }

    pub fn predict(&self, x: &FeatureVec) -> u8 {
        self.as_classifier().predict(x)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Linear(m) => match m.kind {
                crate::linmod::LinearKind::Ridge => ModelKind::Ridge,
                crate::linmod::LinearKind::Logistic => ModelKind::Logistic,
                crate::linmod::LinearKind::LinearSvm => ModelKind::LinearSvm,
            },
            AnyModel::Kernel(_) => ModelKind::RbfSvm,
            AnyModel::Mlp(_) => ModelKind::Mlp,
        }
    }
}

/// Fit `kind` with `hp` on `train`; the MLP additionally needs `val` for
/// early stopping.
pub fn fit_model(
    kind: ModelKind,
    hp: &Hyperparams,
    train_ds: &Dataset,
    val_ds: Option<&Dataset>,
    budget: &FitBudget,
    seed: u64,
) -> Result<AnyModel, EvalError> {
    let weights = class_weights(train_ds).map_err(|e| EvalError::Data(e.to_string()))?;
    let model = match (kind, hp) {
        (ModelKind::Ridge, Hyperparams::Linear { lambda }) => AnyModel::Linear(
            fit_ridge(train_ds, *lambda, weights).map_err(|e| EvalError::Fit(e.to_string()))?,
        ),
        (ModelKind::Logistic, Hyperparams::Linear { lambda }) => {
            let fit = fit_logistic(
                train_ds,
                *lambda,
                weights,
                budget.logistic_max_iter,
                budget.logistic_tol,
            )
            .map_err(|e| EvalError::Fit(e.to_string()))?;
            AnyModel::Linear(fit.model)
        }
        (ModelKind::LinearSvm, Hyperparams::Linear { lambda }) => AnyModel::Linear(
            fit_linear_svm(train_ds, *lambda, weights, budget.svm_epochs, seed)
                .map_err(|e| EvalError::Fit(e.to_string()))?,
        ),
        (ModelKind::RbfSvm, Hyperparams::Rbf { c, gamma }) => AnyModel::Kernel(
            fit_rbf_svm(train_ds, *c, *gamma, weights, budget.svm_epochs, seed)
                .map_err(|e| EvalError::Fit(e.to_string()))?,
        ),
        (ModelKind::Mlp, Hyperparams::Mlp(config)) => {
            let val = val_ds.ok_or_else(|| {
                EvalError::Fit("MLP fitting needs a validation set".to_string())
            })?;
            let (model, _) = train(config.clone(), train_ds, val, budget.mlp_max_epochs)
                .map_err(|e| EvalError::Fit(e.to_string()))?;
            AnyModel::Mlp(model)
        }
        (kind, hp) => {
            return Err(EvalError::Fit(format!(
                "hyperparameter record {hp:?} does not match model kind {kind}"
            )))
        }
    };
    Ok(model)
}

/// Validation outcome of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub hyperparams: Hyperparams,
    pub val_weighted_f1: f64,
    pub val_confusion: ConfusionMatrix,
}

fn evaluate(model: &AnyModel, ds: &Dataset) -> (ConfusionMatrix, f64) {
    let truth: Vec<u8> = ds.samples().iter().map(|s| s.y).collect();
    let pred: Vec<u8> = ds.samples().iter().map(|s| model.predict(&s.x)).collect();
    let cm = confusion(&truth, &pred).expect("lengths match");
    let wf1 = weighted_f1_of(&cm);
    (cm, wf1)
}

/// Exhaustive grid search for the linear and kernel families. Best by
/// validation weighted F1; ties prefer the more regularized candidate
/// (larger λ, smaller C), then the earlier grid position.
pub fn grid_search(
    kind: ModelKind,
    space: &SearchSpace,
    train_ds: &Dataset,
    val_ds: &Dataset,
    budget: &FitBudget,
    seed: u64,
) -> Result<SearchOutcome, EvalError> {
    let candidates: Vec<(Hyperparams, f64)> = match kind {
        ModelKind::Ridge | ModelKind::Logistic => space
            .linear_lambda_grid
            .iter()
            .map(|&l| (Hyperparams::Linear { lambda: l }, l))
            .collect(),
        ModelKind::LinearSvm => space
            .linear_lambda_grid
            .iter()
            .map(|&c| (Hyperparams::Linear { lambda: c }, -c))
            .collect(),
        ModelKind::RbfSvm => {
            let mut cs = Vec::new();
            for &c in &space.rbf_c_grid {
                for g in &space.rbf_gamma_grid {
                    let gamma = g.resolve(train_ds);
                    (gamma > 0.0).then_some(()).ok_or_else(|| {
                        EvalError::Fit(format!("non-positive resolved gamma {gamma}"))
                    })?;
                    cs.push((Hyperparams::Rbf { c, gamma }, -c));
                }
            }
            cs
        }
        ModelKind::Mlp => {
            return Err(EvalError::Fit(
                "the MLP uses random_search, not grid_search".to_string(),
            ))
        }
    };
    if candidates.is_empty() {
        return Err(EvalError::EmptySearchSpace);
    }

    let mut scored = candidates
        .into_par_iter()
        .enumerate()
        .map(|(order, (hp, reg_key))| {
            let model = fit_model(kind, &hp, train_ds, None, budget, seed)?;
            let (cm, wf1) = evaluate(&model, val_ds);
            Ok((order, hp, cm, wf1, reg_key))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    scored.sort_by(|a, b| {
        b.3.partial_cmp(&a.3)
            .unwrap()
            .then(b.4.partial_cmp(&a.4).unwrap())
            .then(a.0.cmp(&b.0))
    });
    let best = scored.into_iter().next().unwrap();
    Ok(SearchOutcome {
        hyperparams: best.1,
        val_weighted_f1: best.3,
        val_confusion: best.2,
    })
}

/// One random-search trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: MlpConfig,
    pub val_weighted_f1: f64,
}

/// Seeded random search over the MLP space: `budget` independent draws,
/// best by validation weighted F1 (first winner kept on ties). The full
/// trial log is returned alongside the winner. Configs are drawn
/// sequentially from the seeded stream and then fitted in parallel, so
/// results are identical regardless of worker count.
pub fn random_search(
    space: &MlpSearchSpace,
    budget: usize,
    seed: u64,
    train_ds: &Dataset,
    val_ds: &Dataset,
    fit: &FitBudget,
) -> Result<(SearchOutcome, Vec<TrialRecord>), EvalError> {
    assert!(budget >= 1, "random search budget must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<MlpConfig> = (0..budget)
        .map(|trial| sample_config(space, &mut rng, splitmix(seed, trial as u64)))
        .collect();

    let evaluated: Vec<(ConfusionMatrix, f64)> = configs
        .par_iter()
        .map(|config| {
            let model = fit_model(
                ModelKind::Mlp,
                &Hyperparams::Mlp(config.clone()),
                train_ds,
                Some(val_ds),
                fit,
                seed,
            )?;
            Ok(evaluate(&model, val_ds))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(SearchOutcome, f64)> = None;
    for (trial, (config, (cm, wf1))) in configs.into_iter().zip(evaluated).enumerate() {
        trials.push(TrialRecord {
            trial,
            config: config.clone(),
            val_weighted_f1: wf1,
        });
        if best.as_ref().is_none_or(|(_, b)| wf1 > *b) {
            best = Some((
                SearchOutcome {
                    hyperparams: Hyperparams::Mlp(config),
                    val_weighted_f1: wf1,
                    val_confusion: cm,
                },
                wf1,
            ));
        }
    }
    Ok((best.unwrap().0, trials))
}

fn log_uniform(range: (f64, f64), rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = range;
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

fn sample_config(space: &MlpSearchSpace, rng: &mut ChaCha8Rng, model_seed: u64) -> MlpConfig {
    assert!(
        !space.layer_counts.is_empty()
            && !space.unit_choices.is_empty()
            && !space.activations.is_empty(),
        "search space ranges must be non-empty"
    );
    let layers = space.layer_counts[rng.gen_range(0..space.layer_counts.len())];
    let units: Vec<usize> = (0..layers)
        .map(|_| space.unit_choices[rng.gen_range(0..space.unit_choices.len())])
        .collect();
    let mut config = MlpConfig::new(units);
    config.activation = space.activations[rng.gen_range(0..space.activations.len())];
    config.l2_lambda = log_uniform(space.lambda_range, rng);
    config.dropout_p = rng.gen_range(space.dropout_range.0..=space.dropout_range.1);
    config.lr = log_uniform(space.lr_range, rng);
    config.seed = model_seed;
    config
}

/// Cheap stateless seed derivation (splitmix64 finalizer).
pub(crate) fn splitmix(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
