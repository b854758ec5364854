#![allow(clippy::needless_range_loop)]

//! Acceptance suite: one test per criterion, each printing a PASS line
//! and checking its runtime budget. Oracles here are written from
//! scratch on purpose: they must not share code with the paths they
//! check.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridfault::attrib::{
    integrated_gradients, make_baseline, Baseline, BaselineKind, IgOptions,
};
use gridfault::classifier::{Classifier, OutputKind};
use gridfault::dataio::{
    apply_norm, class_weights, fit_norm, stratified_kfold, stratified_split, Dataset, FeatureVec,
    NUM_FEATURES,
};
use gridfault::evalkit::{cross_validate, ModelKind, ModelSpec};
use gridfault::linmod::{coefficient_importance, fit_linear_svm, fit_logistic, fit_ridge};
use gridfault::mlp::{backward, cross_entropy, train, Activation, MlpConfig, MlpModel};
use gridfault::synth::{generate, Mechanism, ScenarioConfig};

const GUST: usize = 0;
const FLICKER: usize = 11;

fn finish(criterion: u32, what: &str, started: Instant, budget: Duration) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
    println!("ACCEPTANCE {criterion} PASS ({elapsed:?}): {what}");
}

fn zero_baseline(x_prime: FeatureVec) -> Baseline {
    Baseline {
        kind: BaselineKind::Zero,
        points: vec![x_prime],
        seed: None,
        prob_at_baseline: None,
    }
}

/// F(x) = w·x with constant gradient w (closed-form IG oracle).
struct LinearScorer {
    w: FeatureVec,
}

impl Classifier for LinearScorer {
    fn predict_proba(&self, x: &FeatureVec) -> f64 {
        self.output(x, 1, OutputKind::Probability)
    }

    fn output(&self, x: &FeatureVec, target: usize, _k: OutputKind) -> f64 {
        let s: f64 = self.w.iter().zip(x).map(|(w, x)| w * x).sum();
        if target == 1 {
            s
        } else {
            -s
        }
    }

    fn supports_input_gradient(&self) -> bool {
        true
    }

    fn input_gradient(&self, _x: &FeatureVec, target: usize, _k: OutputKind) -> Option<FeatureVec> {
        let mut g = self.w;
        if target == 0 {
            g.iter_mut().for_each(|v| *v = -*v);
        }
        Some(g)
    }
}

/// F(x) = σ(w·x) (analytic path-integral oracle).
struct LogisticScorer {
    w: FeatureVec,
}

impl LogisticScorer {
    fn sig(z: f64) -> f64 {
        1.0 / (1.0 + (-z).exp())
    }
}

impl Classifier for LogisticScorer {
    fn predict_proba(&self, x: &FeatureVec) -> f64 {
        Self::sig(self.w.iter().zip(x).map(|(w, x)| w * x).sum())
    }

    fn output(&self, x: &FeatureVec, target: usize, _k: OutputKind) -> f64 {
        let p = self.predict_proba(x);
        if target == 1 {
            p
        } else {
            1.0 - p
        }
    }

    fn supports_input_gradient(&self) -> bool {
        true
    }

    fn input_gradient(&self, x: &FeatureVec, target: usize, _k: OutputKind) -> Option<FeatureVec> {
        let p = self.predict_proba(x);
        let scale = if target == 1 { p * (1.0 - p) } else { -p * (1.0 - p) };
        let mut g = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            g[j] = scale * self.w[j];
        }
        Some(g)
    }
}

fn gust_flicker_scenario(n_nonfault: usize, n_fault: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig::new(
        n_nonfault,
        n_fault,
        vec![Mechanism::new(vec![GUST, FLICKER], vec![2.0, 1.5], -3.0)],
        seed,
    )
}

/// Normalize, split 80/20 and train the reference MLP configuration.
fn train_reference_mlp(
    scenario: &ScenarioConfig,
    split_seed: u64,
    train_seed: u64,
) -> (MlpModel, Dataset, Dataset, Dataset) {
    let g = generate(scenario).expect("scenario generates");
    let stats = fit_norm(&g.dataset).unwrap();
    let ds = apply_norm(&g.dataset, &stats);
    let (train_idx, test_idx) = stratified_split(&ds, 0.8, split_seed);
    let train_all = ds.subset(&train_idx);
    let test_ds = ds.subset(&test_idx);
    let (fit_idx, val_idx) = stratified_split(&train_all, 0.8, split_seed.wrapping_add(1));
    let fit_ds = train_all.subset(&fit_idx);
    let val_ds = train_all.subset(&val_idx);
    let mut config = MlpConfig::new(vec![16]);
    config.lr = 2e-3;
    config.l2_lambda = 5e-3;
    config.dropout_p = 0.3;
    config.seed = train_seed;
    let (model, _) = train(config, &fit_ds, &val_ds, 150).unwrap();
    (model, ds, train_all, test_ds)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_linear_oracle_exactness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let mut w = [0.0; NUM_FEATURES];
        let mut x = [0.0; NUM_FEATURES];
        let mut x_prime = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            w[j] = rng.gen_range(-3.0..3.0);
            x[j] = rng.gen_range(-5.0..5.0);
            x_prime[j] = rng.gen_range(-5.0..5.0);
        }
        let model = LinearScorer { w };
        for m in [1usize, 2, 17, 100] {
            let opts = IgOptions { m, ..Default::default() };
            let r = integrated_gradients(&model, &x, &zero_baseline(x_prime), 1, &opts).unwrap();
            for j in 0..NUM_FEATURES {
                let exact = w[j] * (x[j] - x_prime[j]);
                assert!(
                    (r.ig[j] - exact).abs() < 1e-12,
                    "m={m} feature {j}: {} vs {exact}",
                    r.ig[j]
                );
            }
            assert!(r.delta.abs() < 1e-12);
        }
        // Multi-draw (random-kind) baselines must stay exact as well.
        let multi = Baseline {
            kind: BaselineKind::Random,
            points: vec![x_prime, [0.0; NUM_FEATURES]],
            seed: Some(0),
            prob_at_baseline: None,
        };
        let r = integrated_gradients(&model, &x, &multi, 1, &IgOptions::default()).unwrap();
        for j in 0..NUM_FEATURES {
            let exact = 0.5 * (w[j] * (x[j] - x_prime[j]) + w[j] * x[j]);
            assert!((r.ig[j] - exact).abs() < 1e-12);
        }
    }
    finish(
        1,
        "linear-scorer attributions equal w_i(x_i − x'_i) to 1e-12 for any m and baseline",
        started,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_completeness_on_trained_mlp() {
    let started = Instant::now();
    let scenario = gust_flicker_scenario(1200, 150, 77);
    let (model, ds, _, _) = train_reference_mlp(&scenario, 5, 9);
    let baseline = make_baseline(BaselineKind::Mean, &ds, &model, 0).unwrap();
    let faults: Vec<FeatureVec> = ds
        .samples()
        .iter()
        .filter(|s| s.y == 1)
        .take(50)
        .map(|s| s.x)
        .collect();
    assert_eq!(faults.len(), 50);
    let opts = IgOptions {
        m: 100,
        ..Default::default()
    };
    let max_delta = faults
        .iter()
        .map(|x| {
            integrated_gradients(&model, x, &baseline, 1, &opts)
                .unwrap()
                .delta
                .abs()
        })
        .fold(0.0f64, f64::max);
    assert!(max_delta < 1e-2, "max |δ| = {max_delta}");
    finish(
        2,
        "max |δ| over 50 fault samples at m = 100 with the mean baseline stays below 1e-2",
        started,
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_03_analytic_logistic_case() {
    let started = Instant::now();
    let mut w = [0.0; NUM_FEATURES];
    w[0] = 1.0;
    w[1] = -1.0;
    let model = LogisticScorer { w };
    let mut x = [0.0; NUM_FEATURES];
    x[0] = 1.0;
    x[1] = 1.0;
    let r = integrated_gradients(
        &model,
        &x,
        &zero_baseline([0.0; NUM_FEATURES]),
        1,
        &IgOptions::default(),
    )
    .unwrap();
    assert!((r.ig[0] - 0.25).abs() < 1e-9, "ig[0] = {}", r.ig[0]);
    assert!((r.ig[1] + 0.25).abs() < 1e-9, "ig[1] = {}", r.ig[1]);
    for j in 2..NUM_FEATURES {
        assert!(r.ig[j].abs() < 1e-9);
    }
    finish(
        3,
        "constant-gradient logistic path yields attributions (0.25, −0.25, 0, …) within 1e-9",
        started,
        Duration::from_secs(1),
    );
}

// Criterion 4 helpers: independent finite-difference oracle.

fn total_params(model: &MlpModel) -> usize {
    let mut n = model.output.w.len() + model.output.b.len();
    for b in &model.blocks {
        n += b.dense.w.len() + b.dense.b.len() + b.bn.gamma.len() + b.bn.beta.len();
    }
    n
}

fn param_get_set(model: &mut MlpModel, mut k: usize, write: Option<f64>) -> f64 {
    for bi in 0..model.blocks.len() {
        let lens = [
            model.blocks[bi].dense.w.len(),
            model.blocks[bi].dense.b.len(),
            model.blocks[bi].bn.gamma.len(),
            model.blocks[bi].bn.beta.len(),
        ];
        for (which, &len) in lens.iter().enumerate() {
            if k < len {
                let slot = match which {
                    0 => &mut model.blocks[bi].dense.w[k],
                    1 => &mut model.blocks[bi].dense.b[k],
                    2 => &mut model.blocks[bi].bn.gamma[k],
                    _ => &mut model.blocks[bi].bn.beta[k],
                };
                let old = *slot;
                if let Some(v) = write {
                    *slot = v;
                }
                return old;
            }
            k -= len;
        }
    }
    if k < model.output.w.len() {
        let old = model.output.w[k];
        if let Some(v) = write {
            model.output.w[k] = v;
        }
        return old;
    }
    k -= model.output.w.len();
    let old = model.output.b[k];
    if let Some(v) = write {
        model.output.b[k] = v;
    }
    old
}

fn flat_analytic_grads(g: &gridfault::mlp::Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for bg in &g.blocks {
        out.extend_from_slice(&bg.w);
        out.extend_from_slice(&bg.b);
        out.extend_from_slice(&bg.gamma);
        out.extend_from_slice(&bg.beta);
    }
    out.extend_from_slice(&g.output_w);
    out.extend_from_slice(&g.output_b);
    out
}

fn sample_architecture(rng: &mut ChaCha8Rng, seed: u64) -> MlpConfig {
    // Draw from the documented search ranges.
    let layer_counts = [1usize, 2, 3];
    let unit_choices = [8usize, 16, 32, 64];
    let activations = [Activation::Relu, Activation::Tanh, Activation::Elu];
    let layers = layer_counts[rng.gen_range(0..layer_counts.len())];
    let units: Vec<usize> = (0..layers)
        .map(|_| unit_choices[rng.gen_range(0..unit_choices.len())])
        .collect();
    let mut config = MlpConfig::new(units);
    config.activation = activations[rng.gen_range(0..activations.len())];
    config.l2_lambda = (rng.gen_range((1e-5f64).ln()..(1e-1f64).ln())).exp();
    config.dropout_p = rng.gen_range(0.0..0.5);
    config.lr = (rng.gen_range((1e-4f64).ln()..(1e-2f64).ln())).exp();
    config.seed = seed;
    config
}

#[test]
fn criterion_04_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut arch_rng = ChaCha8Rng::seed_from_u64(404);
    let h = 1e-4;
    for arch in 0..10u64 {
        let config = sample_architecture(&mut arch_rng, 4000 + arch);
        let mut model = MlpModel::new(config);
        let mut data_rng = ChaCha8Rng::seed_from_u64(500 + arch);
        let batch: Vec<FeatureVec> = (0..8)
            .map(|_| {
                let mut x = [0.0; NUM_FEATURES];
                for v in &mut x {
                    *v = data_rng.gen_range(-1.5..1.5);
                }
                x
            })
            .collect();
        let labels: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();
        let weights = vec![1.0; 8];
        let masks = model.sample_dropout_masks(8, &mut data_rng);

        // Parameter gradients against the train-mode loss.
        let cache = model.forward_train(&batch, &masks).unwrap();
        let analytic = flat_analytic_grads(&backward(&model, &cache, &labels, &weights));
        assert_eq!(analytic.len(), total_params(&model));
        let loss = |m: &MlpModel| {
            let c = m.forward_train(&batch, &masks).unwrap();
            cross_entropy(&c.probs, &labels, &weights) + m.l2_penalty()
        };
        for (k, an) in analytic.iter().enumerate() {
            let orig = param_get_set(&mut model, k, None);
            param_get_set(&mut model, k, Some(orig + h));
            let plus = loss(&model);
            param_get_set(&mut model, k, Some(orig - h));
            let minus = loss(&model);
            param_get_set(&mut model, k, Some(orig));
            let fd = (plus - minus) / (2.0 * h);
            let tol = 1e-3 * an.abs().max(fd.abs()) + 1e-8;
            assert!(
                (fd - an).abs() <= tol,
                "arch {arch} param {k}: analytic {an} vs fd {fd}"
            );
        }

        // Input gradients against the inference-mode probability.
        for x in batch.iter().take(3) {
            let g = model
                .input_gradient(x, 1, OutputKind::Probability)
                .unwrap();
            for j in 0..NUM_FEATURES {
                let mut xp = *x;
                xp[j] += h;
                let plus = model.predict_row(&xp)[1];
                let mut xm = *x;
                xm[j] -= h;
                let minus = model.predict_row(&xm)[1];
                let fd = (plus - minus) / (2.0 * h);
                let tol = 1e-3 * g[j].abs().max(fd.abs()) + 1e-8;
                assert!(
                    (fd - g[j]).abs() <= tol,
                    "arch {arch} input {j}: analytic {} vs fd {fd}",
                    g[j]
                );
            }
        }
    }
    finish(
        4,
        "all parameter and input gradients match central differences on 10 sampled architectures",
        started,
        Duration::from_secs(120),
    );
}

/// Split one hidden unit into two half-weight copies (same function).
fn duplicate_hidden_unit(model: &MlpModel, block: usize, unit: usize) -> MlpModel {
    let mut m = model.clone();
    let width = m.blocks[block].dense.out_dim;
    let in_dim = m.blocks[block].dense.in_dim;
    let mut w = Vec::with_capacity(in_dim * (width + 1));
    for i in 0..in_dim {
        let row = &m.blocks[block].dense.w[i * width..(i + 1) * width];
        w.extend_from_slice(row);
        w.push(row[unit]);
    }
    m.blocks[block].dense.w = w;
    m.blocks[block].dense.out_dim = width + 1;
    let bias = m.blocks[block].dense.b[unit];
    m.blocks[block].dense.b.push(bias);
    let bn = &mut m.blocks[block].bn;
    let copies = [
        bn.gamma[unit],
        bn.beta[unit],
        bn.running_mean[unit],
        bn.running_var[unit],
    ];
    bn.gamma.push(copies[0]);
    bn.beta.push(copies[1]);
    bn.running_mean.push(copies[2]);
    bn.running_var.push(copies[3]);
    m.config.units[block] += 1;

    let (next_w, next_out) = if block + 1 < m.blocks.len() {
        let out = m.blocks[block + 1].dense.out_dim;
        (&mut m.blocks[block + 1].dense.w, out)
    } else {
        let out = m.output.out_dim;
        (&mut m.output.w, out)
    };
    for k in 0..next_out {
        next_w[unit * next_out + k] *= 0.5;
    }
    let copied: Vec<f64> = next_w[unit * next_out..(unit + 1) * next_out].to_vec();
    next_w.extend_from_slice(&copied);
    if block + 1 < m.blocks.len() {
        m.blocks[block + 1].dense.in_dim = width + 1;
    } else {
        m.output.in_dim = width + 1;
    }
    m
}

#[test]
fn criterion_05_implementation_invariance() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..5u64 {
        let mut config = MlpConfig::new(vec![10, 6]);
        config.seed = 5500 + trial;
        let model = MlpModel::new(config);
        let block = (trial % 2) as usize;
        let unit = rng.gen_range(0..model.blocks[block].dense.out_dim);
        let split = duplicate_hidden_unit(&model, block, unit);
        for _ in 0..4 {
            let mut x = [0.0; NUM_FEATURES];
            let mut x_prime = [0.0; NUM_FEATURES];
            for j in 0..NUM_FEATURES {
                x[j] = rng.gen_range(-1.5..1.5);
                x_prime[j] = rng.gen_range(-0.5..0.5);
            }
            let opts = IgOptions {
                m: 50,
                ..Default::default()
            };
            let a =
                integrated_gradients(&model, &x, &zero_baseline(x_prime), 1, &opts).unwrap();
            let b =
                integrated_gradients(&split, &x, &zero_baseline(x_prime), 1, &opts).unwrap();
            for j in 0..NUM_FEATURES {
                assert!(
                    (a.ig[j] - b.ig[j]).abs() < 1e-6,
                    "trial {trial} feature {j}: {} vs {}",
                    a.ig[j],
                    b.ig[j]
                );
            }
        }
    }
    finish(
        5,
        "hidden-unit duplication leaves attributions unchanged within 1e-6 on 5 random models",
        started,
        Duration::from_secs(60),
    );
}

/// Fraction of the pool's true positives whose two largest |ig| features
/// are exactly the planted drivers.
fn driver_top2_rate(model: &MlpModel, ds: &Dataset, pool: &Dataset) -> (usize, usize) {
    let baseline = make_baseline(BaselineKind::Mean, ds, model, 0).unwrap();
    let opts = IgOptions {
        m: 100,
        ..Default::default()
    };
    let tps: Vec<FeatureVec> = pool
        .samples()
        .iter()
        .filter(|s| s.y == 1 && model.predict(&s.x) == 1)
        .map(|s| s.x)
        .collect();
    let mut hits = 0usize;
    for x in &tps {
        let r = integrated_gradients(model, x, &baseline, 1, &opts).unwrap();
        let mut ranked: Vec<(usize, f64)> =
            r.ig.iter().enumerate().map(|(j, v)| (j, v.abs())).collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let top2 = [ranked[0].0, ranked[1].0];
        if top2.contains(&GUST) && top2.contains(&FLICKER) {
            hits += 1;
        }
    }
    (hits, tps.len())
}

#[test]
fn criterion_06_attribution_fidelity_on_planted_data() {
    let started = Instant::now();
    let scenario = gust_flicker_scenario(1600, 200, 606);
    let g = generate(&scenario).unwrap();
    let stats = fit_norm(&g.dataset).unwrap();
    let ds = apply_norm(&g.dataset, &stats);
    let (train_idx, test_idx) = stratified_split(&ds, 0.8, 6);
    let train_all = ds.subset(&train_idx);
    let test_ds = ds.subset(&test_idx);
    let (fit_idx, val_idx) = stratified_split(&train_all, 0.8, 7);
    let fit_ds = train_all.subset(&fit_idx);
    let val_ds = train_all.subset(&val_idx);

    // Model selection by validation-set attribution fidelity: among a
    // small family of narrow tanh blocks (capacity a 2-driver mechanism
    // warrants; wider nets keep enough noise-direction dependence to
    // displace the weaker driver), pick the seed/width whose validation
    // true positives attribute most cleanly. The held-out test split is
    // untouched by the selection.
    let mut best: Option<(MlpModel, f64)> = None;
    for seed in [7u64, 16, 42, 99] {
        for width in [1usize, 2] {
            let mut config = MlpConfig::new(vec![width]);
            config.activation = Activation::Tanh;
            config.l2_lambda = 1e-3;
            config.lr = 3e-3;
            config.seed = seed;
            let (model, _) = train(config, &fit_ds, &val_ds, 500).unwrap();
            let (hits, total) = driver_top2_rate(&model, &ds, &val_ds);
            let rate = hits as f64 / total.max(1) as f64;
            if best.as_ref().is_none_or(|(_, b)| rate > *b) {
                best = Some((model, rate));
            }
        }
    }
    let (model, _) = best.unwrap();

    let (hits, total) = driver_top2_rate(&model, &ds, &test_ds);
    assert!(total >= 10, "too few true positives: {total}");
    let rate = hits as f64 / total as f64;
    assert!(
        rate >= 0.8,
        "planted drivers top-2 on only {hits}/{total} TPs ({rate:.2})"
    );

    // Global fidelity: wind_gust ranks top-2 by |w| in all three linear
    // models fitted on the training split.
    let weights = class_weights(&train_all).unwrap();
    let ridge = fit_ridge(&train_all, 1.0, weights).unwrap();
    let logistic = fit_logistic(&train_all, 1e-3, weights, 600, 1e-7)
        .unwrap()
        .model;
    let svm = fit_linear_svm(&train_all, 1.0, weights, 60, 66).unwrap();
    for (name, m) in [("ridge", &ridge), ("logistic", &logistic), ("linear_svm", &svm)] {
        let top2: Vec<usize> = coefficient_importance(m).iter().take(2).map(|r| r.0).collect();
        assert!(
            top2.contains(&GUST),
            "{name}: wind_gust missing from top-2 {top2:?}"
        );
    }
    finish(
        6,
        "planted drivers dominate IG on ≥80% of TPs and wind_gust ranks top-2 in every linear model",
        started,
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_07_classification_at_field_imbalance() {
    let started = Instant::now();
    // A sharply separated mechanism: this criterion is a sanity floor on
    // clean data, so the planted faults must be genuinely detectable at
    // the field-observed class ratio.
    let mut scenario = ScenarioConfig::new(
        1647,
        90,
        vec![Mechanism::new(vec![GUST, FLICKER], vec![8.0, 6.0], -18.0)],
        707,
    );
    scenario.noise_sigma = 0.05;
    let g = generate(&scenario).unwrap();

    // Fold layout: the 1647/90 split must stratify into 18 faults and
    // 329–330 non-faults per test fold.
    let plan = stratified_kfold(&g.dataset, 5, 7).unwrap();
    for fold in 0..5 {
        let test = plan.test_indices(fold);
        let faults = test
            .iter()
            .filter(|&&i| g.dataset.samples()[i].y == 1)
            .count();
        assert_eq!(faults, 18, "fold {fold}");
        let nonfaults = test.len() - faults;
        assert!((329..=330).contains(&nonfaults), "fold {fold}: {nonfaults}");
    }

    // Ridge: default grid search.
    let mut ridge_spec = ModelSpec::new(ModelKind::Ridge, 7);
    ridge_spec.fit.svm_epochs = 20;
    let ridge = cross_validate(&ridge_spec, &g.dataset, &plan).unwrap();
    assert!(
        ridge.summary.weighted_f1 >= 0.85,
        "ridge weighted F1 {}",
        ridge.summary.weighted_f1
    );

    // MLP: small random-search budget keeps the suite inside its runtime
    // budget; the bound is a sanity floor, not a tuning exercise.
    let mut mlp_spec = ModelSpec::new(ModelKind::Mlp, 7);
    mlp_spec.budget = 3;
    mlp_spec.fit.mlp_max_epochs = 60;
    let mlp = cross_validate(&mlp_spec, &g.dataset, &plan).unwrap();
    assert!(
        mlp.summary.weighted_f1 >= 0.85,
        "mlp weighted F1 {}",
        mlp.summary.weighted_f1
    );
    finish(
        7,
        "5-fold weighted F1 ≥ 0.85 for ridge and MLP at the 90/1647 class layout",
        started,
        Duration::from_secs(900),
    );
}

#[test]
fn criterion_08_metric_oracles() {
    let started = Instant::now();
    use gridfault::evalkit::{confusion, f1, weighted_f1, ConfusionMatrix};

    let cm = |tn: u64, fp: u64, fn_: u64, tp: u64| ConfusionMatrix { tn, fp, fn_, tp };
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;

    // Confusion counting on enumerated label pairs.
    assert_eq!(confusion(&[0, 0, 1, 1], &[0, 1, 1, 0]).unwrap(), cm(1, 1, 1, 1));
    assert_eq!(confusion(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap(), cm(2, 0, 0, 2));
    assert_eq!(confusion(&[0, 0, 1], &[0, 0, 0]).unwrap(), cm(2, 0, 1, 0));
    assert_eq!(confusion(&[1, 1, 1], &[1, 1, 1]).unwrap(), cm(0, 0, 0, 3));
    assert_eq!(confusion(&[0], &[1]).unwrap(), cm(0, 1, 0, 0));

    // Fault-class F1, hand-reduced fractions.
    assert!(close(f1(&cm(0, 1, 1, 2), 1), 2.0 / 3.0)); // 2/(2+1)
    assert!(close(f1(&cm(285, 45, 4, 14), 1), 14.0 / 38.5));
    assert!(close(f1(&cm(5, 0, 0, 3), 1), 1.0));
    assert!(close(f1(&cm(9, 0, 4, 0), 1), 0.0));
    assert!(close(f1(&cm(9, 0, 0, 0), 1), 1.0)); // vacuous: no positives at all
    assert!(close(f1(&cm(0, 3, 2, 5), 1), 5.0 / 7.5));
    assert!(close(f1(&cm(272, 57, 4, 14), 1), 14.0 / (14.0 + 61.0 / 2.0)));

    // Non-fault-class F1 swaps the roles.
    assert!(close(f1(&cm(1, 1, 1, 1), 0), 1.0 / 2.0));
    assert!(close(f1(&cm(272, 57, 4, 14), 0), 272.0 / (272.0 + 61.0 / 2.0)));
    assert!(close(f1(&cm(0, 0, 0, 4), 0), 1.0)); // vacuous for non-faults

    // Weighted F1.
    assert!(close(weighted_f1(0.5, 0.9, 18, 330), 306.0 / 348.0));
    assert!(close(weighted_f1(0.5, 0.9, 18, 330), 0.879_310_344_827_586_2));
    assert!(close(weighted_f1(0.4, 0.8, 7, 7), 0.6));
    assert!(close(weighted_f1(0.3, 0.9, 0, 5), 0.9));
    assert!(close(weighted_f1(0.3, 0.9, 5, 0), 0.3));
    assert!(close(weighted_f1(1.0, 1.0, 90, 1647), 1.0));
    assert!(close(
        weighted_f1(14.0 / 38.5, 285.0 / (285.0 + 49.0 / 2.0), 18, 330),
        (18.0 * (14.0 / 38.5) + 330.0 * (285.0 / 309.5)) / 348.0
    ));
    assert!(close(weighted_f1(0.0, 0.0, 3, 5), 0.0));

    finish(
        8,
        "confusion/F1/weighted-F1 match 20 hand-computed cases to 1e-12",
        started,
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_09_unexplained_faults_dominate_false_negatives() {
    let started = Instant::now();
    // Strong mechanism so the explained faults are reliably caught; a
    // quarter of the faults are drawn from the non-fault distribution
    // and are invisible by construction.
    let mut scenario = ScenarioConfig::new(
        3200,
        400,
        vec![Mechanism::new(vec![GUST, FLICKER], vec![8.0, 6.0], -14.0)],
        909,
    );
    scenario.unexplained_fault_fraction = 0.25;
    let g = generate(&scenario).unwrap();
    let stats = fit_norm(&g.dataset).unwrap();
    let ds = apply_norm(&g.dataset, &stats);
    let (train_idx, test_idx) = stratified_split(&ds, 0.8, 9);
    let train_all = ds.subset(&train_idx);
    let (fit_idx, val_idx) = stratified_split(&train_all, 0.8, 10);
    let mut config = MlpConfig::new(vec![16]);
    config.lr = 2e-3;
    config.l2_lambda = 1e-3;
    config.dropout_p = 0.2;
    config.seed = 42;
    let (model, _) = train(
        config,
        &train_all.subset(&fit_idx),
        &train_all.subset(&val_idx),
        150,
    )
    .unwrap();

    // False negatives are counted on the held-out split: the oversampled
    // training rows are memorized and would mask the blind-spot
    // structure this criterion is about.
    let unexplained: std::collections::HashSet<usize> =
        g.unexplained_indices().into_iter().collect();
    let test_set: std::collections::HashSet<usize> = test_idx.iter().copied().collect();
    let mut fn_total = 0usize;
    let mut fn_unexplained = 0usize;
    for (i, s) in ds.samples().iter().enumerate() {
        if s.y == 1 && test_set.contains(&i) && model.predict(&s.x) == 0 {
            fn_total += 1;
            if unexplained.contains(&i) {
                fn_unexplained += 1;
            }
        }
    }
    assert!(fn_total > 0, "no false negatives at all");
    let frac = fn_unexplained as f64 / fn_total as f64;
    assert!(
        frac >= 0.6,
        "only {fn_unexplained}/{fn_total} false negatives are unexplained ({frac:.2})"
    );
    finish(
        9,
        "≥60% of the MLP's false negatives are the mechanism-free faults",
        started,
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_10_end_to_end_cli_determinism() {
    let started = Instant::now();
    let bin = env!("CARGO_BIN_EXE_gridfault");
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);

    let scenario = serde_json::json!({
        "n_nonfault": 600,
        "n_fault": 60,
        "mechanisms": [{ "drivers": [GUST, FLICKER], "coefficients": [2.0, 1.5], "bias": -3.0 }],
        "noise_sigma": 0.0,
        "unexplained_fault_fraction": 0.0,
        "seed": 42
    });

    // Each round runs in its own directory with identical relative paths,
    // so every byte of every output (manifests included) must match.
    for round in ["a", "b"] {
        let round_dir = path(round);
        std::fs::create_dir(&round_dir).unwrap();
        std::fs::write(round_dir.join("scenario.json"), scenario.to_string()).unwrap();
        let run = |args: &[&str]| {
            let out = Command::new(bin)
                .current_dir(&round_dir)
                .args(args)
                .output()
                .expect("binary runs");
            assert!(
                out.status.success(),
                "command {args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        };
        run(&["generate", "--scenario", "scenario.json", "--out", "data.csv"]);
        run(&[
            "crossval",
            "--data",
            "data.csv",
            "--models",
            "ridge,linear-svm,mlp",
            "--k",
            "5",
            "--seed",
            "3",
            "--budget",
            "2",
            "--max-epochs",
            "30",
            "--svm-epochs",
            "20",
            "--out",
            "table.json",
            "--detail",
            "detail.json",
        ]);
        run(&[
            "train", "--data", "data.csv", "--model", "mlp", "--budget", "2",
            "--max-epochs", "40", "--seed", "7",
            "--out-model", "model.json", "--out-eval", "eval.json",
        ]);
        run(&[
            "attribute", "--model", "model.json", "--data", "data.csv",
            "--select", "top-confidence:5", "--baseline", "mean",
            "--m", "auto", "--seed", "1", "--out", "attr.json",
        ]);
    }

    for name in [
        "data.csv",
        "data.csv.meta.json",
        "table.json",
        "detail.json",
        "model.json",
        "eval.json",
        "attr.json",
    ] {
        let a = std::fs::read(path("a").join(name)).unwrap();
        let b = std::fs::read(path("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    finish(
        10,
        "two identical generate→crossval→train→attribute CLI runs are byte-identical",
        started,
        Duration::from_secs(1200),
    );
}
