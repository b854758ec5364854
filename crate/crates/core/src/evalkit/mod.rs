//! Evaluation machinery: confusion/F1 metrics, hyperparameter search and
//! the stratified cross-validation protocol.

mod crossval;
mod metrics;
mod search;

pub use crossval::{
    cross_validate, round_half_even, CrossValResult, CrossValSummary, EvalReport, ModelSpec,
};
pub use metrics::{confusion, f1, weighted_f1, weighted_f1_of, ConfusionMatrix};
pub use search::{
    fit_model, grid_search, random_search, AnyModel, FitBudget, GammaSpec, Hyperparams,
    MlpSearchSpace, ModelKind, SearchOutcome, SearchSpace, TrialRecord,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label vectors differ in length: {truth} true vs {pred} predicted")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("fold {fold} is missing a class")]
    FoldMissingClass { fold: usize },
    #[error("search space is empty")]
    EmptySearchSpace,
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
}
