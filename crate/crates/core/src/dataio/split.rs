//! Stratified data splitting: k-fold plans and single train/validation
//! splits, both seeded and deterministic.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

/// A stratified assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of each sample, aligned with the dataset order.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Indices held out as the test set of `fold`.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices forming the training portion of `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Shuffle (seeded) and deal each class into `k` folds so that per-fold
/// class counts differ from the ideal ratio by at most one sample.
pub fn stratified_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    assert!(k >= 2, "k must be at least 2");
    for label in [0u8, 1u8] {
        let count = ds.count(label);
        if count < k {
            return Err(DataError::ClassTooSmall { label, count, k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; ds.len()];
    for label in [0u8, 1u8] {
        let mut indices: Vec<usize> = ds
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.y == label)
            .map(|(i, _)| i)
            .collect();
        indices.shuffle(&mut rng);
        let base = indices.len() / k;
        let extra = indices.len() % k;
        let mut cursor = 0;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            for &i in &indices[cursor..cursor + size] {
                assignments[i] = fold;
            }
            cursor += size;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// Single stratified split into (train, rest) index sets.
///
/// Each class contributes `round(train_frac * n_c)` samples to the train
/// side, clamped so that neither side loses a class entirely (when the
/// class has at least two members).
pub fn stratified_split(
    ds: &Dataset,
    train_frac: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    assert!((0.0..=1.0).contains(&train_frac));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for label in [0u8, 1u8] {
        let mut indices: Vec<usize> = ds
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.y == label)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            continue;
        }
        indices.shuffle(&mut rng);
        let mut n_train = (train_frac * indices.len() as f64).round() as usize;
        if indices.len() >= 2 {
            n_train = n_train.clamp(1, indices.len() - 1);
        }
        train.extend_from_slice(&indices[..n_train]);
        rest.extend_from_slice(&indices[n_train..]);
    }
    train.sort_unstable();
    rest.sort_unstable();
    (train, rest)
}
