//! Stratified cross-validation runner with nested hyperparameter
//! selection. Per fold: fit normalization on the training portion only,
//! select hyperparameters on an inner stratified 80/20 split, refit, and
//! score the held-out test fold. Folds run in parallel and merge by
//! index, so results are independent of worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::{apply_norm, fit_norm, stratified_split, Dataset, FoldPlan};

use super::metrics::{confusion, f1, weighted_f1_of, ConfusionMatrix};
use super::search::{
    fit_model, grid_search, random_search, splitmix, FitBudget, Hyperparams, ModelKind,
    SearchSpace,
};
use super::EvalError;

/// What to evaluate and with which search configuration.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub space: SearchSpace,
    /// Random-search trials for the MLP; ignored for grid-searched kinds.
    pub budget: usize,
    pub fit: FitBudget,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec {
            kind,
            space: SearchSpace::default(),
            budget: 200,
            fit: FitBudget::default(),
            seed,
        }
    }
}

/// Per-fold evaluation record.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub fold: usize,
    pub model_kind: ModelKind,
    pub confusion: ConfusionMatrix,
    pub f1_fault: f64,
    pub f1_nonfault: f64,
    pub f1_weighted: f64,
    pub hyperparams: Hyperparams,
    /// The fitted model itself, for persistence and leakage audits.
    pub model: serde_json::Value,
}

/// Cross-fold averages in the layout of the results table: confusion
/// counts are means rounded half-even to integers.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CrossValSummary {
    pub classifier: ModelKind,
    pub tn: i64,
    pub fp: i64,
    #[serde(rename = "fn")]
    pub fn_: i64,
    pub tp: i64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValResult {
    pub reports: Vec<EvalReport>,
    pub summary: CrossValSummary,
}

/// Round to nearest with ties to the even integer.
pub fn round_half_even(x: f64) -> i64 {
    let floor = x.floor();
    let frac = x - floor;
    let f = floor as i64;
    match frac.partial_cmp(&0.5).expect("finite counts") {
        std::cmp::Ordering::Greater => f + 1,
        std::cmp::Ordering::Less => f,
        std::cmp::Ordering::Equal => {
            if f % 2 == 0 {
                f
            } else {
                f + 1
            }
        }
    }
}

/// Run the full nested evaluation protocol over `plan`.
pub fn cross_validate(
    spec: &ModelSpec,
    ds: &Dataset,
    plan: &FoldPlan,
) -> Result<CrossValResult, EvalError> {
    assert_eq!(plan.assignments.len(), ds.len(), "plan must cover the dataset");
    let reports: Vec<EvalReport> = (0..plan.k)
        .into_par_iter()
        .map(|fold| run_fold(spec, ds, plan, fold))
        .collect::<Result<Vec<_>, _>>()?;

    let k = reports.len() as f64;
    let mean = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let summary = CrossValSummary {
        classifier: spec.kind,
        tn: round_half_even(mean(&|r| r.confusion.tn as f64)),
        fp: round_half_even(mean(&|r| r.confusion.fp as f64)),
        fn_: round_half_even(mean(&|r| r.confusion.fn_ as f64)),
        tp: round_half_even(mean(&|r| r.confusion.tp as f64)),
        weighted_f1: mean(&|r| r.f1_weighted),
    };
    Ok(CrossValResult { reports, summary })
}

fn run_fold(
    spec: &ModelSpec,
    ds: &Dataset,
    plan: &FoldPlan,
    fold: usize,
) -> Result<EvalReport, EvalError> {
    let train_idx = plan.train_indices(fold);
    let test_idx = plan.test_indices(fold);
    let train_raw = ds.subset(&train_idx);
    let test_raw = ds.subset(&test_idx);
    for part in [&train_raw, &test_raw] {
        if part.n_fault() == 0 || part.n_nonfault() == 0 {
            return Err(EvalError::FoldMissingClass { fold });
        }
    }

    // Normalization statistics come from the training portion only.
    let stats = fit_norm(&train_raw).map_err(|e| EvalError::Data(e.to_string()))?;
    let train_n = apply_norm(&train_raw, &stats);
    let test_n = apply_norm(&test_raw, &stats);

    // Inner stratified 80/20 split for hyperparameter selection.
    let inner_seed = splitmix(spec.seed, fold as u64);
    let (inner_train_idx, inner_val_idx) = stratified_split(&train_n, 0.8, inner_seed);
    let inner_train = train_n.subset(&inner_train_idx);
    let inner_val = train_n.subset(&inner_val_idx);
    if inner_val.n_fault() == 0 || inner_val.n_nonfault() == 0 {
        return Err(EvalError::FoldMissingClass { fold });
    }

    let fit_seed = splitmix(spec.seed, 1000 + fold as u64);
    let (hyperparams, model) = match spec.kind {
        ModelKind::Mlp => {
            let (outcome, _trials) = random_search(
                &spec.space.mlp,
                spec.budget,
                inner_seed,
                &inner_train,
                &inner_val,
                &spec.fit,
            )?;
            // The MLP needs held-out data for early stopping, so the
            // refit trains on the inner split with the chosen config.
            let model = fit_model(
                spec.kind,
                &outcome.hyperparams,
                &inner_train,
                Some(&inner_val),
                &spec.fit,
                fit_seed,
            )?;
            (outcome.hyperparams, model)
        }
        _ => {
            let outcome = grid_search(
                spec.kind,
                &spec.space,
                &inner_train,
                &inner_val,
                &spec.fit,
                fit_seed,
            )?;
            // Refit on the full training portion with the chosen
            // hyperparameters.
            let model = fit_model(
                spec.kind,
                &outcome.hyperparams,
                &train_n,
                None,
                &spec.fit,
                fit_seed,
            )?;
            (outcome.hyperparams, model)
        }
    };

    let truth: Vec<u8> = test_n.samples().iter().map(|s| s.y).collect();
    let pred: Vec<u8> = test_n.samples().iter().map(|s| model.predict(&s.x)).collect();
    let cm = confusion(&truth, &pred)?;
    Ok(EvalReport {
        fold,
        model_kind: spec.kind,
        f1_fault: f1(&cm, 1),
        f1_nonfault: f1(&cm, 0),
        f1_weighted: weighted_f1_of(&cm),
        confusion: cm,
        hyperparams,
        model: serde_json::to_value(&model).expect("model serializes"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{stratified_kfold, FeatureSchema, Sample, Timestamp, NUM_FEATURES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn imbalanced_dataset(n0: usize, n1: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::new();
        for i in 0..(n0 + n1) {
            let y = u8::from(i >= n0);
            let mut x = [0.0; NUM_FEATURES];
            for v in &mut x {
                *v = rng.gen_range(-0.5..0.5);
            }
            x[0] += if y == 1 { 2.0 } else { -2.0 };
            x[3] = 1000.0 + rng.gen_range(-5.0..5.0); // un-normalized scale
            samples.push(Sample::new(x, y, Timestamp::from_minutes(i as i64)));
        }
        Dataset::new(samples, FeatureSchema::standard())
    }

    fn quick_spec(kind: ModelKind) -> ModelSpec {
        let mut spec = ModelSpec::new(kind, 11);
        spec.space.linear_lambda_grid = vec![1e-2, 1.0];
        spec.fit.svm_epochs = 15;
        spec.fit.logistic_max_iter = 150;
        spec.budget = 2;
        spec.fit.mlp_max_epochs = 12;
        spec
    }

    #[test]
    fn round_half_even_cases() {
        assert_eq!(round_half_even(2.5), 2);
        assert_eq!(round_half_even(3.5), 4);
        assert_eq!(round_half_even(2.4), 2);
        assert_eq!(round_half_even(2.6), 3);
        assert_eq!(round_half_even(-0.5), 0);
        assert_eq!(round_half_even(-1.5), -2);
        assert_eq!(round_half_even(7.0), 7);
    }

    #[test]
    fn fold_layout_and_summary_consistency() {
        let ds = imbalanced_dataset(200, 25, 3);
        let plan = stratified_kfold(&ds, 5, 42).unwrap();
        let result = cross_validate(&quick_spec(ModelKind::Ridge), &ds, &plan).unwrap();
        assert_eq!(result.reports.len(), 5);
        for (i, r) in result.reports.iter().enumerate() {
            assert_eq!(r.fold, i);
            assert_eq!(r.confusion.total(), 45);
            assert_eq!(r.confusion.count_of(1), 5);
            // Report f1s must be recomputable from the confusion matrix.
            assert!((r.f1_fault - f1(&r.confusion, 1)).abs() < 1e-15);
            assert!((r.f1_weighted - weighted_f1_of(&r.confusion)).abs() < 1e-15);
        }
        assert!(result.summary.weighted_f1 > 0.9, "{}", result.summary.weighted_f1);
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = imbalanced_dataset(120, 20, 5);
        let plan = stratified_kfold(&ds, 4, 7).unwrap();
        let spec = quick_spec(ModelKind::Logistic);
        let a = cross_validate(&spec, &ds, &plan).unwrap();
        let b = cross_validate(&spec, &ds, &plan).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn test_fold_poisoning_does_not_change_fitted_models() {
        let ds = imbalanced_dataset(120, 20, 9);
        let plan = stratified_kfold(&ds, 4, 13).unwrap();
        let spec = quick_spec(ModelKind::Ridge);
        let clean = cross_validate(&spec, &ds, &plan).unwrap();

        // Poison every feature of fold 0's test samples.
        let poisoned_samples: Vec<Sample> = ds
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if plan.assignments[i] == 0 {
                    Sample::new([1e6; NUM_FEATURES], s.y, s.timestamp)
                } else {
                    s.clone()
                }
            })
            .collect();
        let poisoned = Dataset::new(poisoned_samples, FeatureSchema::standard());
        let dirty = cross_validate(&spec, &poisoned, &plan).unwrap();

        // Fold 0's fitted parameters and chosen hyperparameters must be
        // untouched by the poisoned test features.
        assert_eq!(clean.reports[0].model, dirty.reports[0].model);
        assert_eq!(
            serde_json::to_string(&clean.reports[0].hyperparams).unwrap(),
            serde_json::to_string(&dirty.reports[0].hyperparams).unwrap()
        );
        // Predictions on the poisoned fold of course differ.
        assert_ne!(clean.reports[0].confusion, dirty.reports[0].confusion);
    }

    #[test]
    fn missing_class_in_a_fold_is_reported() {
        // Degenerate plan: all faults assigned to fold 0.
        let ds = imbalanced_dataset(40, 8, 2);
        let mut plan = stratified_kfold(&ds, 4, 1).unwrap();
        for (i, s) in ds.samples().iter().enumerate() {
            if s.y == 1 {
                plan.assignments[i] = 0;
            }
        }
        let err = cross_validate(&quick_spec(ModelKind::Ridge), &ds, &plan).unwrap_err();
        assert!(matches!(err, EvalError::FoldMissingClass { .. }));
    }
}
