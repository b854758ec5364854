//! Confusion-matrix based classification metrics with faults as the
//! positive class.

use serde::{Deserialize, Serialize};

use super::EvalError;

/// 2×2 confusion counts; fault (label 1) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    /// Actual samples of `label`.
    pub fn count_of(&self, label: u8) -> u64 {
        if label == 1 {
            self.tp + self.fn_
        } else {
            self.tn + self.fp
        }
    }
}

/// Count the 2×2 cells of predictions against ground truth.
pub fn confusion(labels_true: &[u8], labels_pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if labels_true.len() != labels_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: labels_true.len(),
            pred: labels_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix {
        tn: 0,
        fp: 0,
        fn_: 0,
        tp: 0,
    };
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, _) => cm.fp += 1,
            (_, 0) => cm.fn_ += 1,
            _ => cm.tp += 1,
        }
    }
    Ok(cm)
}

/// `F1 = tp / (tp + (fp + fn)/2)` for the requested positive class.
///
/// Degenerate convention: when the class never occurs and is never
/// predicted (tp = fp = fn = 0 for that class) the score is 1.
pub fn f1(cm: &ConfusionMatrix, positive: u8) -> f64 {
    let (tp, fp, fn_) = if positive == 1 {
        (cm.tp, cm.fp, cm.fn_)
    } else {
        (cm.tn, cm.fn_, cm.fp)
    };
    if tp + fp + fn_ == 0 {
        return 1.0;
    }
    tp as f64 / (tp as f64 + (fp + fn_) as f64 / 2.0)
}

/// Class-size-weighted mean of the per-class F1 scores:
/// `(n₁·F1₁ + n₀·F1₀) / (n₁ + n₀)`. The counts must not both be zero.
pub fn weighted_f1(f1_fault: f64, f1_nonfault: f64, n_fault: u64, n_nonfault: u64) -> f64 {
    let total = n_fault + n_nonfault;
    assert!(total > 0, "weighted F1 needs at least one sample");
    (n_fault as f64 * f1_fault + n_nonfault as f64 * f1_nonfault) / total as f64
}

/// Weighted F1 straight from a confusion matrix, weighting by the actual
/// class counts it encodes.
pub fn weighted_f1_of(cm: &ConfusionMatrix) -> f64 {
    weighted_f1(f1(cm, 1), f1(cm, 0), cm.count_of(1), cm.count_of(0))
}
