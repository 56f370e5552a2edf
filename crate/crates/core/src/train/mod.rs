//! Mini-batch Adam training, evaluation, and the leave-one-subject-out harness.

mod loso;
mod report;

pub use loso::{assert_no_leakage, run_fold, run_loso, LosoOutcome, RunResult};
pub use report::{summarize_models, LosoReport, ModelSummary, ModelSummaryEntry};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, EpochSet};
use crate::decoders::DecoderError;
use crate::nn::{
    forward, predict, softmax_xent, LayerSpec, Mode, NnError, ParamStore, Tensor, Trainable,
    BN_MOMENTUM,
};
use crate::seed::derive;
use crate::signal::SignalError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptySet(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("test subject {subject} present in the {part} data of its own fold")]
    Leakage { subject: String, part: &'static str },
    #[error("fold {subject}, repetition {repetition}: {source}")]
    Fold {
        subject: String,
        repetition: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error("malformed report: {0}")]
    Report(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-accuracy improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience > self.max_epochs {
            return bad(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        if !(self.learning_rate > 0.0 && self.epsilon > 0.0) {
            return bad("learning_rate and epsilon must be positive".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("moment decay rates must lie in [0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ParamStore,
    pub history: Vec<EpochRecord>,
    /// 1-based.
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<Trainable>,
    v: Vec<Trainable>,
    t: i32,
}

impl Adam {
    fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Trainable> = params.trainable.iter().map(Trainable::zeros_like).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ParamStore, grads: &[Trainable], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let lr = cfg.learning_rate;
        for (i, g) in grads.iter().enumerate() {
            let p = &mut params.trainable[i];
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (theta, (g, (m, v))) in [
                (&mut p.weight, (&g.weight, (&mut m.weight, &mut v.weight))),
                (&mut p.bias, (&g.bias, (&mut m.bias, &mut v.bias))),
            ] {
                for j in 0..theta.len() {
                    m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                    v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                    theta[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + cfg.epsilon);
                }
            }
        }
    }
}

/// Trials `indices` of `set` as a `batch × 1 × channels × samples` tensor.
pub(crate) fn batch_tensor(set: &EpochSet, indices: &[usize]) -> Tensor {
    let len = set.trial_len();
    let mut data = Vec::with_capacity(indices.len() * len);
    for &i in indices {
        data.extend_from_slice(set.epoch(i));
    }
    Tensor::from_vec([indices.len(), 1, set.n_channels(), set.n_samples()], data)
        .expect("trial slices match the set shape")
}

fn label_indices(set: &EpochSet, indices: &[usize]) -> Vec<usize> {
    indices.iter().map(|&i| set.labels()[i].index()).collect()
}

fn argmax_hits(logits: &Tensor, labels: &[usize]) -> usize {
    let k = logits.shape()[1];
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &y)| {
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
            best.0 == y
        })
        .count()
}

const EVAL_CHUNK: usize = 64;

/// Eval-mode mean loss and accuracy.
fn score(stack: &[LayerSpec], params: &ParamStore, set: &EpochSet) -> Result<(f64, f64), TrainError> {
    let n = set.n_trials();
    let mut loss = 0.0;
    let mut hits = 0;
    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let x = batch_tensor(set, chunk);
        let y = label_indices(set, chunk);
        let logits = predict(stack, params, &x)?;
        loss += softmax_xent(&logits, &y)?.0 * chunk.len() as f64;
        hits += argmax_hits(&logits, &y);
    }
    Ok((loss / n as f64, hits as f64 / n as f64))
}

/// Accuracy of an eval-mode forward pass over `test`.
pub fn evaluate(stack: &[LayerSpec], params: &ParamStore, test: &EpochSet) -> Result<f64, TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptySet("test"));
    }
    Ok(score(stack, params, test)?.1)
}

pub fn train(
    stack: &[LayerSpec],
    params: ParamStore,
    train_set: &EpochSet,
    val_set: &EpochSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_guarded(stack, params, train_set, val_set, cfg, None)
}

/// [`train`], additionally checking every batch's subject tags against
/// `forbidden`.
pub(crate) fn train_guarded(
    stack: &[LayerSpec],
    mut params: ParamStore,
    train_set: &EpochSet,
    val_set: &EpochSet,
    cfg: &TrainConfig,
    forbidden: Option<&str>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySet("training"));
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySet("validation"));
    }
    params.check(stack)?;
    let mut adam = Adam::new(&params);
    let mut order: Vec<usize> = (0..train_set.n_trials()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if let Some(subject) = forbidden {
                if chunk.iter().any(|&i| train_set.subject_ids()[i] == subject) {
                    return Err(TrainError::Leakage {
                        subject: subject.to_string(),
                        part: "training",
                    });
                }
            }
            let x = batch_tensor(train_set, chunk);
            let y = label_indices(train_set, chunk);
            let dropout_seed = derive(cfg.seed, &[epoch as u64, b as u64]);
            let (logits, cache) = forward(stack, &params, &x, Mode::Train, dropout_seed)?;
            let (loss, dlogits) = softmax_xent(&logits, &y)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            hits += argmax_hits(&logits, &y);
            let grads = crate::nn::backward_params(stack, &params, &cache, &dlogits)?;
            adam.step(&mut params, &grads, cfg);
            params.update_running_stats(&cache, BN_MOMENTUM);
        }
        let (val_loss, val_accuracy) = score(stack, &params, val_set)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let n = train_set.n_trials() as f64;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: hits as f64 / n,
            val_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_accuracy > *acc) {
            best = Some((val_accuracy, epoch, params.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}
