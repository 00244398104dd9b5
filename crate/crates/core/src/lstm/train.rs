//! Training loop: chronological mini-batches, Adam, early stopping with
//! best-weight restoration, and learning-rate reduction on plateau.

use super::adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
use super::backward::backward;
use super::{forward, init_params, LossKind, ModelParams};
use crate::dataset::{SampleSet, SplitLabel};
use crate::error::{Error, Result};
use ndarray::{Array1, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Minimum mini-batch size under the Sharpe loss; its per-batch variance
/// estimate is unstable below this.
pub const SHARPE_MIN_BATCH: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stop patience in epochs.
    pub patience: usize,
    pub lr_factor: f64,
    pub lr_patience: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dropout: f64,
    /// Chronological batches by default; shuffling is opt-in.
    pub shuffle: bool,
    pub early_stopping: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Mse,
            gamma: 2.0,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            lr_factor: 0.5,
            lr_patience: 5,
            seed: 0,
            hidden: 64,
            dropout: 0.2,
            shuffle: false,
            early_stopping: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_log: Vec<EpochLog>,
    /// 1-based epoch with the minimum validation loss.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub final_val_loss: f64,
}

/// Early-stop and LR-plateau bookkeeping, separated out so the stopping
/// arithmetic is testable on synthetic loss sequences.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    pub patience: usize,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub best: f64,
    pub best_epoch: usize,
    epochs_since_best: usize,
    epochs_since_lr_cut: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopSignal {
    pub improved: bool,
    pub reduce_lr: bool,
    pub stop: bool,
}

impl EarlyStopper {
    pub fn new(patience: usize, lr_patience: usize, lr_factor: f64) -> Self {
        Self {
            patience,
            lr_patience,
            lr_factor,
            best: f64::INFINITY,
            best_epoch: 0,
            epochs_since_best: 0,
            epochs_since_lr_cut: 0,
        }
    }

    /// Feed one epoch's validation loss (1-based epoch index). Strict
    /// improvement resets both counters.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopSignal {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.epochs_since_best = 0;
            self.epochs_since_lr_cut = 0;
            return StopSignal { improved: true, reduce_lr: false, stop: false };
        }
        self.epochs_since_best += 1;
        self.epochs_since_lr_cut += 1;
        let reduce_lr = self.epochs_since_lr_cut >= self.lr_patience;
        if reduce_lr {
            self.epochs_since_lr_cut = 0;
        }
        StopSignal { improved: false, reduce_lr, stop: self.epochs_since_best >= self.patience }
    }
}

fn stack_batch(set: &SampleSet, indices: &[usize]) -> (Array3<f64>, Array1<f64>, Array1<f64>) {
    let (t, m) = set.samples[indices[0]].window.dim();
    let mut batch = Array3::zeros((indices.len(), t, m));
    let mut targets = Array1::zeros(indices.len());
    let mut returns = Array1::zeros(indices.len());
    for (row, &idx) in indices.iter().enumerate() {
        let s = &set.samples[idx];
        batch.index_axis_mut(ndarray::Axis(0), row).assign(&s.window);
        targets[row] = s.target;
        returns[row] = s.next_return;
    }
    (batch, targets, returns)
}

fn evaluate(
    params: &ModelParams,
    set: &SampleSet,
    indices: &[usize],
    loss: LossKind,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let (batch, targets, returns) = stack_batch(set, indices);
    let cache = forward(params, &batch, false, rng)?;
    match loss {
        LossKind::Mse => super::loss_mse(&cache.preds, &targets),
        LossKind::Sharpe => super::loss_sharpe(&cache.preds, &returns, gamma),
    }
}

/// Train on the sample set's train split, monitoring its validation split.
/// Fully deterministic given the seed.
pub fn train(set: &SampleSet, config: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    let train_idx = set.indices_of(SplitLabel::Train);
    let val_idx = set.indices_of(SplitLabel::Validation);
    if train_idx.is_empty() {
        return Err(Error::EmptySplit { split: "train".into() });
    }
    if val_idx.is_empty() {
        return Err(Error::EmptySplit { split: "validation".into() });
    }
    if config.loss == LossKind::Sharpe && config.batch_size < SHARPE_MIN_BATCH {
        return Err(Error::InvalidConfig(format!(
            "batch_size must be >= {SHARPE_MIN_BATCH} under the Sharpe loss"
        )));
    }

    let m = set.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init_params(m, config.hidden, config.dropout, config.seed);
    let mut flat = params.flatten();
    let mut adam = AdamState::new(flat.len());
    let mut lr = config.learning_rate;

    // Chronological batches; a trailing fragment too small for the Sharpe
    // variance estimate is merged into its predecessor.
    let mut batches: Vec<Vec<usize>> =
        train_idx.chunks(config.batch_size).map(|c| c.to_vec()).collect();
    if config.loss == LossKind::Sharpe && batches.len() > 1 {
        let last_len = batches.last().unwrap().len();
        if last_len < SHARPE_MIN_BATCH {
            let tail = batches.pop().unwrap();
            batches.last_mut().unwrap().extend(tail);
        }
    }

    let mut stopper = EarlyStopper::new(config.patience, config.lr_patience, config.lr_factor);
    let mut best_params = params.clone();
    let mut report = TrainReport {
        epoch_log: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        final_val_loss: f64::NAN,
    };

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..batches.len()).collect();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut n_seen = 0usize;
        for &bi in &order {
            let indices = &batches[bi];
            let (batch, targets, returns) = stack_batch(set, indices);
            let cache = forward(&params, &batch, true, &mut rng)?;
            let aux = match config.loss {
                LossKind::Mse => &targets,
                LossKind::Sharpe => &returns,
            };
            let (loss_value, grads) = backward(&params, &cache, config.loss, aux, config.gamma)?;
            if !loss_value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_loss += loss_value * indices.len() as f64;
            n_seen += indices.len();

            let grad_flat = grads.flatten();
            adam_step(&mut flat, &grad_flat, &mut adam, lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
            params.assign_from_flat(&flat);
        }
        let train_loss = epoch_loss / n_seen as f64;
        let val_loss = evaluate(&params, set, &val_idx, config.loss, config.gamma, &mut rng)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        report.epoch_log.push(EpochLog { epoch, train_loss, val_loss, learning_rate: lr });

        let signal = stopper.observe(epoch, val_loss);
        if signal.improved {
            best_params = params.clone();
        }
        if signal.reduce_lr {
            lr *= config.lr_factor;
        }
        if signal.stop && config.early_stopping {
            report.stopped_early = true;
            break;
        }
    }

    report.best_epoch = stopper.best_epoch;
    if config.early_stopping {
        params = best_params;
    }
    report.final_val_loss = if config.early_stopping {
        stopper.best
    } else {
        report.epoch_log.last().map(|e| e.val_loss).unwrap_or(f64::NAN)
    };
    Ok((params, report))
}
