//! Training loop: oversampled minority class, seeded batch shuffling,
//! early stopping on validation loss with best-weights restoration, and
//! plateau-driven learning-rate halving.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataio::{oversample_minority, Dataset, FeatureVec};
use crate::evalkit::{confusion, weighted_f1_of};

use super::adam::{apply_adam, AdamHyper, AdamState};
use super::backprop::backward;
use super::{cross_entropy, MlpConfig, MlpError, MlpModel, Mode};

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_weighted_f1: f64,
    /// Learning rate in effect during this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub stop_epoch: usize,
    pub stop_reason: StopReason,
    /// Epoch whose parameters were restored at the end.
    pub best_epoch: usize,
}

/// Early-stop and learning-rate bookkeeping, factored out so the exact
/// patience mechanics are unit-testable without running a real fit.
#[derive(Debug)]
pub(crate) struct Schedule {
    pub lr: f64,
    best: f64,
    since_improve: usize,
    lr_wait: usize,
    patience: usize,
    lr_patience: usize,
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) struct Observation {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

impl Schedule {
    pub fn new(lr: f64) -> Self {
        Schedule {
            lr,
            best: f64::INFINITY,
            since_improve: 0,
            lr_wait: 0,
            patience: 30,
            lr_patience: 10,
        }
    }

    pub fn observe(&mut self, val_loss: f64) -> Observation {
        if val_loss < self.best {
            self.best = val_loss;
            self.since_improve = 0;
            self.lr_wait = 0;
            return Observation {
                improved: true,
                halved: false,
                stop: false,
            };
        }
        self.since_improve += 1;
        self.lr_wait += 1;
        let mut halved = false;
        if self.lr_wait >= self.lr_patience {
            self.lr *= 0.5;
            self.lr_wait = 0;
            halved = true;
        }
        Observation {
            improved: false,
            halved,
            stop: self.since_improve >= self.patience,
        }
    }
}

/// Train a fresh model from `config`.
///
/// The minority class of `train` is oversampled once (seeded) before the
/// first epoch; batches are reshuffled every epoch from the same seeded
/// stream. Validation loss drives both the 10-epoch learning-rate halving
/// and the 30-epoch early stop; the best-validation-loss parameters are
/// restored before returning. Fully deterministic per seed.
pub fn train(
    config: MlpConfig,
    train_ds: &Dataset,
    val_ds: &Dataset,
    max_epochs: usize,
) -> Result<(MlpModel, TrainLog), MlpError> {
    if train_ds.is_empty() {
        return Err(MlpError::EmptyTrainingSet);
    }
    if val_ds.n_fault() == 0 || val_ds.n_nonfault() == 0 {
        return Err(MlpError::ValMissingClass);
    }
    let balanced =
        oversample_minority(train_ds, config.seed).map_err(|_| MlpError::EmptyTrainingSet)?;
    let features: Vec<FeatureVec> = balanced.samples().iter().map(|s| s.x).collect();
    let labels: Vec<u8> = balanced.samples().iter().map(|s| s.y).collect();
    let val_x: Vec<FeatureVec> = val_ds.samples().iter().map(|s| s.x).collect();
    let val_y: Vec<u8> = val_ds.samples().iter().map(|s| s.y).collect();
    let unit_val_w = vec![1.0; val_y.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_size = config.batch_size.max(2);
    let mut model = MlpModel::init(config, &mut rng);
    model.set_mode(Mode::Train);
    let mut adam = AdamState::for_model(&model);
    let hyper = AdamHyper::default();
    let mut schedule = Schedule::new(model.config.lr);

    let mut best_params: Option<(Vec<super::Block>, super::Dense)> = None;
    let mut best_epoch = 0usize;
    let mut log = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut stop_epoch = 0usize;

    let mut order: Vec<usize> = (0..features.len()).collect();
    for epoch in 1..=max_epochs {
        stop_epoch = epoch;
        order.shuffle(&mut rng);
        let mut ce_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(batch_size) {
            if chunk.len() < 2 {
                continue; // batch statistics need at least two rows
            }
            let batch: Vec<FeatureVec> = chunk.iter().map(|&i| features[i]).collect();
            let batch_y: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let unit_w = vec![1.0; chunk.len()];
            let masks = model.sample_dropout_masks(chunk.len(), &mut rng);
            let cache = model.forward_train(&batch, &masks)?;
            ce_sum += cross_entropy(&cache.probs, &batch_y, &unit_w) * chunk.len() as f64;
            seen += chunk.len();
            let grads = backward(&model, &cache, &batch_y, &unit_w);
            apply_adam(&mut model, &grads, &mut adam, schedule.lr, &hyper);
            model.update_running_stats(&cache);
        }
        let train_loss = ce_sum / seen as f64 + model.l2_penalty();

        let (_, val_probs) = {
            model.set_mode(Mode::Inference);
            let out = model.forward_inference(&val_x);
            model.set_mode(Mode::Train);
            out
        };
        let val_loss = cross_entropy(&val_probs, &val_y, &unit_val_w) + model.l2_penalty();
        let val_pred: Vec<u8> = (0..val_y.len())
            .map(|r| u8::from(val_probs[r * 2 + 1] > 0.5))
            .collect();
        let cm = confusion(&val_y, &val_pred).expect("lengths match");
        let val_wf1 = weighted_f1_of(&cm);

        let lr_used = schedule.lr;
        let obs = schedule.observe(val_loss);
        log.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_weighted_f1: val_wf1,
            lr: lr_used,
        });
        if obs.improved {
            best_params = Some((model.blocks.clone(), model.output.clone()));
            best_epoch = epoch;
        }
        if obs.stop {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    if let Some((blocks, output)) = best_params {
        model.blocks = blocks;
        model.output = output;
    }
    model.set_mode(Mode::Inference);
    Ok((
        model,
        TrainLog {
            epochs: log,
            stop_epoch,
            stop_reason,
            best_epoch,
        },
    ))
}
