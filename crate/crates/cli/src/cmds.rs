//! The four pipeline commands: generate, train, crossval, attribute.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use gridfault::attrib::{
    attribution_report, integrated_gradients, make_baseline, select_m, AttributionReport,
    BaselineKind, IgOptions,
};
use gridfault::classifier::Classifier;
use gridfault::dataio::{
    apply_norm, fit_norm, load_csv, stratified_kfold, stratified_split, write_csv, Dataset,
    FeatureSchema, FeatureVec, NormStats,
};
use gridfault::evalkit::{
    cross_validate, fit_model, grid_search, random_search, AnyModel, CrossValSummary, FitBudget,
    Hyperparams, ModelKind, ModelSpec, TrialRecord,
};
use gridfault::synth::{generate, ground_truth_drivers, ScenarioConfig};

use crate::manifest::RunManifest;
use crate::{CliError, EXIT_DATA, EXIT_NUMERIC};

pub fn data_err(err: impl std::fmt::Display, kind: &str, path: Option<&Path>) -> CliError {
    let mut record = json!({ "error": kind, "message": err.to_string() });
    if let Some(p) = path {
        record["path"] = json!(p.display().to_string());
    }
    CliError {
        code: EXIT_DATA,
        record,
    }
}

pub fn numeric_err(err: impl std::fmt::Display, kind: &str) -> CliError {
    CliError {
        code: EXIT_NUMERIC,
        record: json!({ "error": kind, "message": err.to_string() }),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError {
            code: EXIT_DATA,
            record: json!({ "error": "not_found", "path": path.display().to_string() }),
        });
    }
    std::fs::read_to_string(path).map_err(|e| data_err(e, "io", Some(path)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value).expect("serializable output");
    std::fs::write(path, body + "\n").map_err(|e| data_err(e, "io", Some(path)))
}

fn load_dataset(path: &Path) -> Result<(Dataset, usize), CliError> {
    let load = load_csv(path, &FeatureSchema::standard()).map_err(|e| {
        let kind = match e {
            gridfault::dataio::DataError::NotFound(_) => "not_found",
            gridfault::dataio::DataError::HeaderMismatch { .. } => "header_mismatch",
            _ => "data",
        };
        data_err(e, kind, Some(path))
    })?;
    if load.dropped > 0 {
        eprintln!(
            "{}",
            json!({ "warning": "dropped_rows", "count": load.dropped })
        );
    }
    Ok((load.dataset, load.dropped))
}

/// Fitted model plus everything needed to apply it to raw feature rows.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelBundle {
    pub kind: ModelKind,
    pub model: AnyModel,
    pub norm_stats: NormStats,
    pub hyperparams: Hyperparams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

// ---------------------------------------------------------------- generate

pub fn cmd_generate(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let body = read_to_string(scenario)?;
    let mut config: ScenarioConfig =
        serde_json::from_str(&body).map_err(|e| data_err(e, "bad_scenario", Some(scenario)))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let generated = generate(&config).map_err(|e| numeric_err(e, "generation_failed"))?;
    write_csv(out, &generated.dataset).map_err(|e| data_err(e, "io", Some(out)))?;

    let manifest = RunManifest::new("generate")
        .seed(config.seed)
        .input("scenario", scenario.display().to_string())
        .param("n_nonfault", config.n_nonfault)
        .param("n_fault", config.n_fault)
        .param("unexplained_fault_fraction", config.unexplained_fault_fraction)
        .span(&generated.dataset);
    let meta = json!({
        "manifest": manifest,
        "fault_provenance": generated.fault_provenance,
        "ground_truth_drivers": ground_truth_drivers(&config),
    });
    let meta_path = PathBuf::from(format!("{}.meta.json", out.display()));
    write_json(&meta_path, &meta)?;
    println!(
        "{}",
        json!({
            "written": out.display().to_string(),
            "meta": meta_path.display().to_string(),
            "samples": generated.dataset.len(),
            "faults": generated.dataset.n_fault(),
        })
    );
    Ok(())
}

// ------------------------------------------------------------------- train

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    data: &Path,
    kind: ModelKind,
    out_model: &Path,
    out_eval: &Path,
    seed: u64,
    budget: usize,
    max_epochs: usize,
    svm_epochs: usize,
) -> Result<(), CliError> {
    let (ds, _) = load_dataset(data)?;
    let (train_idx, val_idx) = stratified_split(&ds, 0.8, seed);
    let train_raw = ds.subset(&train_idx);
    let val_raw = ds.subset(&val_idx);
    let stats = fit_norm(&train_raw).map_err(|e| data_err(e, "data", Some(data)))?;
    let train_n = apply_norm(&train_raw, &stats);
    let val_n = apply_norm(&val_raw, &stats);

    let space = gridfault::evalkit::SearchSpace::default();
    let fit = FitBudget {
        mlp_max_epochs: max_epochs,
        svm_epochs,
        ..FitBudget::default()
    };
    let (outcome, trials): (_, Vec<TrialRecord>) = match kind {
        ModelKind::Mlp => {
            let (outcome, trials) = random_search(&space.mlp, budget, seed, &train_n, &val_n, &fit)
                .map_err(|e| numeric_err(e, "search_failed"))?;
            (outcome, trials)
        }
        _ => {
            let outcome = grid_search(kind, &space, &train_n, &val_n, &fit, seed)
                .map_err(|e| numeric_err(e, "search_failed"))?;
            (outcome, Vec::new())
        }
    };

    // Final fit: full training split for the closed-form/convex models,
    // the same train/val pair for the MLP (early stopping needs val).
    let model = match kind {
        ModelKind::Mlp => fit_model(kind, &outcome.hyperparams, &train_n, Some(&val_n), &fit, seed),
        _ => fit_model(kind, &outcome.hyperparams, &train_n, None, &fit, seed),
    }
    .map_err(|e| numeric_err(e, "fit_failed"))?;

    let manifest = RunManifest::new("train")
        .seed(seed)
        .input("data", data.display().to_string())
        .param("model", kind)
        .param("budget", budget)
        .param("max_epochs", max_epochs)
        .span(&ds);
    let bundle = ModelBundle {
        kind,
        model,
        norm_stats: stats,
        hyperparams: outcome.hyperparams.clone(),
        manifest: Some(serde_json::to_value(&manifest).unwrap()),
    };
    write_json(out_model, &bundle)?;

    let eval = json!({
        "manifest": manifest,
        "classifier": kind,
        "hyperparams": outcome.hyperparams,
        "validation": {
            "confusion": outcome.val_confusion,
            "weighted_f1": outcome.val_weighted_f1,
        },
        "trials": trials,
    });
    write_json(out_eval, &eval)?;
    println!(
        "{}",
        json!({
            "model": out_model.display().to_string(),
            "eval": out_eval.display().to_string(),
            "val_weighted_f1": outcome.val_weighted_f1,
        })
    );
    Ok(())
}

// ---------------------------------------------------------------- crossval

#[allow(clippy::too_many_arguments)]
pub fn cmd_crossval(
    data: &Path,
    models: &[ModelKind],
    k: usize,
    seed: u64,
    out: &Path,
    detail: Option<&Path>,
    budget: usize,
    max_epochs: usize,
    svm_epochs: usize,
) -> Result<(), CliError> {
    let (ds, _) = load_dataset(data)?;
    let plan = stratified_kfold(&ds, k, seed).map_err(|e| data_err(e, "data", Some(data)))?;

    let mut rows: Vec<CrossValSummary> = Vec::new();
    let mut details = Vec::new();
    for &kind in models {
        let mut spec = ModelSpec::new(kind, seed);
        spec.budget = budget;
        spec.fit.mlp_max_epochs = max_epochs;
        spec.fit.svm_epochs = svm_epochs;
        let result =
            cross_validate(&spec, &ds, &plan).map_err(|e| numeric_err(e, "crossval_failed"))?;
        rows.push(result.summary.clone());
        details.push(json!({ "classifier": kind, "folds": result.reports }));
    }

    let manifest = RunManifest::new("crossval")
        .seed(seed)
        .input("data", data.display().to_string())
        .param("k", k)
        .param(
            "models",
            models
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(","),
        )
        .param("budget", budget)
        .param("max_epochs", max_epochs)
        .span(&ds);
    write_json(out, &json!({ "manifest": manifest, "rows": rows }))?;
    if let Some(detail_path) = detail {
        write_json(
            detail_path,
            &json!({ "manifest": manifest, "models": details }),
        )?;
    }
    println!("{}", json!({ "table": out.display().to_string(), "rows": rows.len() }));
    Ok(())
}

// --------------------------------------------------------------- attribute

/// Which samples to attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    AllTp,
    AllFn,
    TopConfidence(usize),
    Ids(Vec<usize>),
}

impl std::str::FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all-tp" => Ok(Selector::AllTp),
            "all-fn" => Ok(Selector::AllFn),
            _ => {
                if let Some(n) = s.strip_prefix("top-confidence:") {
                    let n: usize = n
                        .parse()
                        .map_err(|_| format!("bad top-confidence count in {s:?}"))?;
                    Ok(Selector::TopConfidence(n))
                } else if let Some(list) = s.strip_prefix("id:") {
                    let ids = list
                        .split(',')
                        .map(|t| t.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| format!("bad id list in {s:?}"))?;
                    Ok(Selector::Ids(ids))
                } else {
                    Err(format!(
                        "unknown selector {s:?} (expected all-tp, all-fn, top-confidence:N or id:...)"
                    ))
                }
            }
        }
    }
}

fn select_samples(
    selector: &Selector,
    ds: &Dataset,
    model: &AnyModel,
) -> Result<Vec<usize>, CliError> {
    let classifier = model.as_classifier();
    let rows: Vec<(usize, u8, u8, f64)> = ds
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = classifier.predict_proba(&s.x);
            (i, s.y, classifier.predict(&s.x), p)
        })
        .collect();
    let picked: Vec<usize> = match selector {
        Selector::AllTp => rows
            .iter()
            .filter(|(_, y, pred, _)| *y == 1 && *pred == 1)
            .map(|r| r.0)
            .collect(),
        Selector::AllFn => rows
            .iter()
            .filter(|(_, y, pred, _)| *y == 1 && *pred == 0)
            .map(|r| r.0)
            .collect(),
        Selector::TopConfidence(n) => {
            // True positives ranked by the model's fault confidence.
            let mut tps: Vec<&(usize, u8, u8, f64)> = rows
                .iter()
                .filter(|(_, y, pred, _)| *y == 1 && *pred == 1)
                .collect();
            tps.sort_by(|a, b| b.3.partial_cmp(&a.3).unwrap().then(a.0.cmp(&b.0)));
            tps.iter().take(*n).map(|r| r.0).collect()
        }
        Selector::Ids(ids) => {
            for &id in ids {
                if id >= ds.len() {
                    return Err(data_err(
                        format!("sample id {id} out of range (0..{})", ds.len()),
                        "bad_selector",
                        None,
                    ));
                }
            }
            ids.clone()
        }
    };
    if picked.is_empty() {
        return Err(data_err(
            "selector matched no samples",
            "empty_selection",
            None,
        ));
    }
    Ok(picked)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_attribute(
    model_path: &Path,
    data: &Path,
    selector: &Selector,
    baseline_kind: BaselineKind,
    m_arg: &str,
    tol: f64,
    target: usize,
    out: &Path,
    seed: u64,
) -> Result<(), CliError> {
    let bundle: ModelBundle = serde_json::from_str(&read_to_string(model_path)?)
        .map_err(|e| data_err(e, "bad_model", Some(model_path)))?;
    let (ds_raw, _) = load_dataset(data)?;
    let ds = apply_norm(&ds_raw, &bundle.norm_stats);

    let classifier: &(dyn Classifier + Sync) = match &bundle.model {
        AnyModel::Mlp(m) => m,
        AnyModel::Linear(m) => m,
        AnyModel::Kernel(m) => m,
    };
    if !classifier.supports_input_gradient() {
        return Err(numeric_err(
            format!(
                "model kind {} does not provide input gradients; use an MLP bundle",
                bundle.kind
            ),
            "gradient_unsupported",
        ));
    }

    let baseline = make_baseline(baseline_kind, &ds, classifier, seed)
        .map_err(|e| numeric_err(e, "baseline_failed"))?;
    if baseline.unbalanced() {
        eprintln!(
            "{}",
            json!({
                "warning": "baseline_unbalanced",
                "p_fault_at_baseline": baseline.prob_at_baseline,
            })
        );
    }

    let picked = select_samples(selector, &ds, &bundle.model)?;
    let features: Vec<FeatureVec> = picked.iter().map(|&i| ds.samples()[i].x).collect();

    // "auto" sweeps the step-count grid for the smallest m within tol.
    let (m, tol_met, max_delta) = if m_arg == "auto" {
        let sel = select_m(
            classifier,
            &features,
            &baseline,
            target,
            tol,
            &[25, 50, 100, 200],
        )
        .map_err(|e| numeric_err(e, "select_m_failed"))?;
        if !sel.tol_met {
            eprintln!(
                "{}",
                json!({
                    "warning": "delta_tolerance_not_met",
                    "m": sel.m,
                    "max_delta": sel.max_delta,
                    "tol": tol,
                })
            );
        }
        (sel.m, sel.tol_met, Some(sel.max_delta))
    } else {
        let m: usize = m_arg
            .parse()
            .map_err(|_| data_err(format!("bad --m value {m_arg:?}"), "usage", None))?;
        if m < 1 {
            return Err(data_err("--m must be at least 1", "usage", None));
        }
        (m, true, None)
    };

    let opts = IgOptions {
        m,
        ..IgOptions::default()
    };
    let schema = FeatureSchema::standard();
    let reports: Vec<AttributionReport> = picked
        .par_iter()
        .zip(&features)
        .map(|(&i, x)| {
            integrated_gradients(classifier, x, &baseline, target, &opts)
                .map(|r| attribution_report(&r.with_sample_id(i), &schema))
                .map_err(|e| numeric_err(e, "attribution_failed"))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let manifest = RunManifest::new("attribute")
        .seed(seed)
        .input("model", model_path.display().to_string())
        .input("data", data.display().to_string())
        .param("baseline", format!("{baseline_kind:?}").to_lowercase())
        .param("m", m_arg)
        .param("tol", tol)
        .param("target", if target == 1 { "fault" } else { "nonfault" })
        .span(&ds_raw);
    let output = json!({
        "manifest": manifest,
        "m": m,
        "tol_met": tol_met,
        "max_delta_at_selection": max_delta,
        "baseline": {
            "kind": baseline.kind,
            "x": baseline.representative(),
            "p_fault": baseline.prob_at_baseline,
        },
        "reports": reports,
    });
    write_json(out, &output)?;
    println!(
        "{}",
        json!({ "attributions": out.display().to_string(), "samples": reports.len(), "m": m })
    );
    Ok(())
}
