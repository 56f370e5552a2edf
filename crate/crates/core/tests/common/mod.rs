//! Helpers shared by the integration test targets; the acceptance suite in
//! `crates/verify` includes this file by path.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sefe_core::dataset::{synth_generate, EpochSet, SynthConfig};
use sefe_core::decoders::{ArchitectureConfig, Backbone};
use sefe_core::nn::{backward, forward, softmax_xent, LayerSpec, Mode, ParamStore, Tensor};
use sefe_core::signal::{preprocess, PreprocessConfig};
use sefe_core::train::TrainConfig;

/// Ten small synthetic subjects preprocessed to 16 × 250 epochs.
pub fn synthetic_subjects(seed: u64) -> Vec<EpochSet> {
    let synth = SynthConfig {
        n_subjects: 10,
        n_channels: 16,
        fs_hz: 125.0,
        trials_per_class: 30,
        snr_db: 10.0,
        subject_variability: 0.1,
        seed,
        ..SynthConfig::default()
    };
    let pre = PreprocessConfig::default();
    synth_generate(&synth)
        .expect("valid synth config")
        .iter()
        .map(|r| preprocess(r, &pre).expect("preprocess"))
        .collect()
}

/// Backbone hyperparameters scaled down for 16 × 250 epochs.
pub fn reduced_arch(n_channels: usize, n_samples: usize) -> ArchitectureConfig {
    let mut a = ArchitectureConfig {
        backbone: Backbone::Deep,
        n_channels,
        n_samples,
        ..ArchitectureConfig::default()
    };
    a.deep.n_filters = [8, 16, 32, 64];
    a.deep.kernel_len = 5;
    a.deep.pool_len = 2;
    a.deep.pool_stride = 2;
    a.shallow.n_filters = 16;
    a.shallow.kernel_len = 13;
    a.shallow.pool_len = 35;
    a.shallow.pool_stride = 7;
    a.eegnet.kernel_len = 32;
    a
}

pub fn fast_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        max_epochs: 8,
        patience: 2,
        seed,
        ..TrainConfig::default()
    }
}

pub fn random_tensor(shape: [usize; 4], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Worst relative error between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        self.max_rel_err = self.max_rel_err.max((analytic - numeric).abs() / denom);
        self.checked += 1;
    }
}

/// Step of the central differences.
pub const FD_STEP: f64 = 1e-5;

/// Scalar probe loss `Σ r ⊙ f(x)` (or cross-entropy when `labels` is given)
/// in train mode with a fixed dropout seed, so the mask is identical across
/// perturbed evaluations.
fn loss(
    stack: &[LayerSpec],
    params: &ParamStore,
    x: &Tensor,
    probe: &Tensor,
    labels: Option<&[usize]>,
) -> f64 {
    let (y, _) = forward(stack, params, x, Mode::Train, 99).unwrap();
    match labels {
        Some(l) => softmax_xent(&y, l).unwrap().0,
        None => y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum(),
    }
}

fn param_mut(p: &mut ParamStore, layer: usize, is_bias: bool, j: usize) -> &mut f64 {
    let t = &mut p.trainable[layer];
    if is_bias {
        &mut t.bias[j]
    } else {
        &mut t.weight[j]
    }
}

/// Compares analytic gradients of every trainable parameter (at most
/// `per_array` evenly spaced coordinates per array) and of up to `n_inputs`
/// input coordinates with central differences.
pub fn grad_check(
    stack: &[LayerSpec],
    params: &ParamStore,
    x: &Tensor,
    labels: Option<&[usize]>,
    per_array: usize,
    n_inputs: usize,
) -> GradCheck {
    let (y, cache) = forward(stack, params, x, Mode::Train, 99).unwrap();
    let probe = random_tensor(y.shape(), 5);
    let upstream = match labels {
        Some(l) => softmax_xent(&y, l).unwrap().1,
        None => probe.clone(),
    };
    let (dx, grads) = backward(stack, params, &cache, &upstream).unwrap();
    let mut check = GradCheck::default();

    for (li, g) in grads.iter().enumerate() {
        for is_bias in [false, true] {
            let len = if is_bias { g.bias.len() } else { g.weight.len() };
            if len == 0 {
                continue;
            }
            let stride = (len / per_array).max(1);
            for j in (0..len).step_by(stride).take(per_array) {
                let mut p = params.clone();
                let orig = *param_mut(&mut p, li, is_bias, j);
                *param_mut(&mut p, li, is_bias, j) = orig + FD_STEP;
                let up = loss(stack, &p, x, &probe, labels);
                *param_mut(&mut p, li, is_bias, j) = orig - FD_STEP;
                let down = loss(stack, &p, x, &probe, labels);
                let numeric = (up - down) / (2.0 * FD_STEP);
                let analytic = if is_bias { g.bias[j] } else { g.weight[j] };
                check.record(analytic, numeric);
            }
        }
    }

    let len = x.data().len();
    let stride = (len / n_inputs.max(1)).max(1);
    for j in (0..len).step_by(stride).take(n_inputs) {
        let mut xp = x.clone();
        xp.data_mut()[j] += FD_STEP;
        let up = loss(stack, params, &xp, &probe, labels);
        xp.data_mut()[j] -= 2.0 * FD_STEP;
        let down = loss(stack, params, &xp, &probe, labels);
        check.record(dx.data()[j], (up - down) / (2.0 * FD_STEP));
    }
    check
}
