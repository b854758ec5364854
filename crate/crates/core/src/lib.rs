//! Imbalance-aware fault prediction for power grids, with global and
//! per-sample interpretability.
//!
//! The crate trains classifiers that flag an imminent grid fault from 12
//! weather and power-quality features, then explains the predictions two
//! ways: globally through linear-model coefficient magnitudes, and locally
//! through Integrated Gradients on the MLP.
//!
//! Module map:
//!
//! - [`dataio`]: feature schema, CSV ingestion, stream alignment,
//!   normalization, stratified folds, class weights, minority oversampling
//! - [`linmod`]: ridge, logistic and linear-SVM classifiers with
//!   class-weighted losses and coefficient ranking
//! - [`kernsvm`]: RBF-kernel SVM
//! - [`mlp`]: dense + batch-norm + dropout blocks, Adam training, exact
//!   input gradients
//! - [`attrib`]: Integrated Gradients: baselines, interpolation path,
//!   completeness residual, attribution reports
//! - [`evalkit`]: confusion/F1 metrics, stratified cross-validation,
//!   hyperparameter search
//! - [`synth`]: seeded synthetic datasets with planted causal mechanisms
//!
//! Everything is deterministic given the explicit seeds; fitted models are
//! immutable and safe to share across threads.
//!
//! ```
//! use gridfault::dataio::{apply_norm, class_weights, fit_norm};
//! use gridfault::linmod::{coefficient_importance, fit_ridge};
//! use gridfault::synth::{generate, Mechanism, ScenarioConfig};
//!
//! // Plant a rule where gusts (feature 0) and flicker (feature 11)
//! // drive the faults, then check a ridge fit rediscovers the drivers.
//! let scenario = ScenarioConfig::new(
//!     400,
//!     50,
//!     vec![Mechanism::new(vec![0, 11], vec![2.0, 1.5], -3.0)],
//!     7,
//! );
//! let generated = generate(&scenario).unwrap();
//! let stats = fit_norm(&generated.dataset).unwrap();
//! let train = apply_norm(&generated.dataset, &stats);
//! let model = fit_ridge(&train, 1.0, class_weights(&train).unwrap()).unwrap();
//! let top: Vec<usize> = coefficient_importance(&model)
//!     .iter()
//!     .take(2)
//!     .map(|r| r.0)
//!     .collect();
//! assert!(top.contains(&0));
//! ```

#![allow(clippy::needless_range_loop)]

pub mod attrib;
pub mod classifier;
pub mod dataio;
pub mod evalkit;
pub mod kernsvm;
pub mod linmod;
pub mod mlp;
pub mod synth;

pub use classifier::{Classifier, OutputKind};
pub use dataio::{Dataset, FeatureSchema, FeatureVec, Sample, NUM_FEATURES};
