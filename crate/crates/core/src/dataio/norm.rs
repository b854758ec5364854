//! Feature-wise z-score normalization, fitted on training data only.

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Sample, NUM_FEATURES};

/// Per-feature mean and population standard deviation.
///
/// Constant features carry `std = 0` and normalize to 0 instead of
/// erroring; they are reported by [`NormStats::constant_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

impl NormStats {
    /// Indices of features that were constant on the fitting data.
    pub fn constant_features(&self) -> Vec<usize> {
        (0..NUM_FEATURES).filter(|&j| self.std[j] == 0.0).collect()
    }

    pub fn normalize(&self, x: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            out[j] = if self.std[j] > 0.0 {
                (x[j] - self.mean[j]) / self.std[j]
            } else {
                0.0
            };
        }
        out
    }

    pub fn denormalize(&self, z: &[f64; NUM_FEATURES]) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            out[j] = z[j] * self.std[j] + self.mean[j];
        }
        out
    }
}

/// Fit per-feature mean and population standard deviation on `train`.
pub fn fit_norm(train: &Dataset) -> Result<NormStats, DataError> {
    if train.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let n = train.len() as f64;
    let mut mean = [0.0; NUM_FEATURES];
    for s in train.samples() {
        for j in 0..NUM_FEATURES {
            mean[j] += s.x[j];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = [0.0; NUM_FEATURES];
    for s in train.samples() {
        for j in 0..NUM_FEATURES {
            let d = s.x[j] - mean[j];
            var[j] += d * d;
        }
    }
    let mut std = [0.0; NUM_FEATURES];
    for j in 0..NUM_FEATURES {
        std[j] = (var[j] / n).sqrt();
    }
    Ok(NormStats { mean, std })
}

/// Apply `stats` feature-wise: `(x_j - mean_j) / std_j`, constants to 0.
pub fn apply_norm(ds: &Dataset, stats: &NormStats) -> Dataset {
    let samples = ds
        .samples()
        .iter()
        .map(|s| Sample::new(stats.normalize(&s.x), s.y, s.timestamp))
        .collect();
    Dataset::new(samples, ds.schema().clone())
}
