use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::ForwardCache;
use super::layer::{Activation, LayerKind, LayerSpec};
use super::NnError;

/// Trainable arrays of one layer. Batch norm stores scale in `weight` and
/// shift in `bias`. Layers without parameters hold empty vectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trainable {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Trainable {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub trainable: Vec<Trainable>,
    /// Batch-norm running statistics, `None` for other layers.
    pub running: Vec<Option<RunningStats>>,
}

impl ParamStore {
    pub fn n_trainable(&self) -> usize {
        self.trainable.iter().map(Trainable::len).sum()
    }

    pub fn check(&self, stack: &[LayerSpec]) -> Result<(), NnError> {
        if self.trainable.len() != stack.len() || self.running.len() != stack.len() {
            return Err(NnError::ParamMismatch {
                index: self.trainable.len().min(stack.len()),
                reason: format!(
                    "store has {} layers, stack has {}",
                    self.trainable.len(),
                    stack.len()
                ),
            });
        }
        for (i, (layer, p)) in stack.iter().zip(&self.trainable).enumerate() {
            let (w, b) = layer.param_lens();
            if p.weight.len() != w || p.bias.len() != b {
                return Err(NnError::ParamMismatch {
                    index: i,
                    reason: format!(
                        "expected {w}+{b} values, found {}+{}",
                        p.weight.len(),
                        p.bias.len()
                    ),
                });
            }
            let is_bn = matches!(layer.kind, LayerKind::BatchNorm { .. });
            if is_bn != self.running[i].is_some() {
                return Err(NnError::ParamMismatch {
                    index: i,
                    reason: "running statistics present on the wrong layer".into(),
                });
            }
        }
        Ok(())
    }

    /// Folds the batch statistics recorded in a train-mode `cache` into the
    /// running estimates (unbiased variance).
    pub fn update_running_stats(&mut self, cache: &ForwardCache, momentum: f64) {
        for (i, stats) in cache.batch_norm_stats() {
            if let Some(run) = self.running[i].as_mut() {
                let (mean, var, count) = stats;
                let unbias = if count > 1 {
                    count as f64 / (count - 1) as f64
                } else {
                    1.0
                };
                for c in 0..run.mean.len() {
                    run.mean[c] = (1.0 - momentum) * run.mean[c] + momentum * mean[c];
                    run.var[c] = (1.0 - momentum) * run.var[c] + momentum * var[c] * unbias;
                }
            }
        }
    }
}

/// Weight variance gain from the first activation after layer `index`
/// (2 for the ReLU family, 1 otherwise).
fn gain_after(stack: &[LayerSpec], index: usize) -> f64 {
    for l in &stack[index + 1..] {
        match l.kind {
            LayerKind::Activation(Activation::Elu | Activation::Relu) => return 2.0,
            LayerKind::Activation(_) | LayerKind::Conv2d(_) | LayerKind::Dense { .. } => return 1.0,
            _ => {}
        }
    }
    1.0
}

/// Uniform weights with variance `gain / fan_in`, zero biases, unit
/// batch-norm scale, zero shift; running mean 0 and variance 1.
pub fn init_params(stack: &[LayerSpec], seed: u64) -> ParamStore {
    let mut trainable = Vec::with_capacity(stack.len());
    let mut running = Vec::with_capacity(stack.len());
    for (i, layer) in stack.iter().enumerate() {
        let (w_len, b_len) = layer.param_lens();
        match layer.kind {
            LayerKind::BatchNorm { channels } => {
                trainable.push(Trainable {
                    weight: vec![1.0; channels],
                    bias: vec![0.0; channels],
                });
                running.push(Some(RunningStats {
                    mean: vec![0.0; channels],
                    var: vec![1.0; channels],
                }));
            }
            LayerKind::Conv2d(_) | LayerKind::Dense { .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let var = gain_after(stack, i) / layer.fan_in() as f64;
                let limit = (3.0 * var).sqrt();
                let weight = (0..w_len).map(|_| rng.random_range(-limit..limit)).collect();
                trainable.push(Trainable {
                    weight,
                    bias: vec![0.0; b_len],
                });
                running.push(None);
            }
            _ => {
                trainable.push(Trainable::default());
                running.push(None);
            }
        }
    }
    ParamStore { trainable, running }
}
