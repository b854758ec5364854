//! Uniform prediction contract shared by all model families.

use crate::dataio::FeatureVec;

/// Which model output an attribution or gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputKind {
    /// Softmax/sigmoid probability of the target class. The default for
    /// attribution work.
    #[default]
    Probability,
    /// Raw pre-softmax score of the target class.
    Logit,
}

/// Common contract over ridge, logistic, linear SVM, RBF SVM and the MLP.
///
/// `predict_proba` returns the probability of the fault class (label 1);
/// `predict` thresholds it at 0.5 with ties broken toward the majority
/// class (label 0). Models that can differentiate their output with
/// respect to the 12 inputs advertise it via `supports_input_gradient`.
pub trait Classifier {
    /// Probability that `x` precedes a fault.
    fn predict_proba(&self, x: &FeatureVec) -> f64;

    /// Hard label; 1 iff the fault probability strictly exceeds 0.5.
    fn predict(&self, x: &FeatureVec) -> u8 {
        u8::from(self.predict_proba(x) > 0.5)
    }

    /// Model output for `target` class, as a probability or a raw score.
    fn output(&self, x: &FeatureVec, target: usize, kind: OutputKind) -> f64;

    /// Whether `input_gradient` returns exact gradients for this model.
    fn supports_input_gradient(&self) -> bool {
        false
    }

    /// Exact gradient of `output(x, target, kind)` with respect to the 12
    /// inputs. `None` when the model does not support input gradients (or
    /// is in a state where they are undefined, e.g. an MLP in train mode).
    fn input_gradient(&self, x: &FeatureVec, target: usize, kind: OutputKind)
        -> Option<FeatureVec>;
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
