//! Layer primitives for the convolutional decoders.
//!
//! Tensors are `batch × feature_channels × electrodes × time`, row-major.
//! A model is a flat list of [`LayerSpec`]s plus a [`ParamStore`]; forward
//! returns a cache that [`backward`] consumes.

mod conv;
mod forward;
mod layer;
mod loss;
mod params;

pub use forward::{backward, forward, predict, BatchStats, ForwardCache, Mode};
pub(crate) use forward::backward_params;
pub use layer::{
    count_params, infer_shapes, Activation, ConvSpec, FeatureShape, LayerKind, LayerSpec,
    Padding, ParamCount, PoolSpec,
};
pub use loss::softmax_xent;
pub use params::{init_params, ParamStore, RunningStats, Trainable};

use thiserror::Error;

/// Clip used by the safe logarithm.
pub const SAFELOG_EPS: f64 = 1e-6;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("layer {index} ({name}): expected input {expected}, got {actual}")]
    ShapeMismatch {
        index: usize,
        name: String,
        expected: String,
        actual: String,
    },
    #[error("layer {index} ({name}): {reason}")]
    InvalidLayer {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("label {label} at position {index} out of range for {n_classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("cache does not match: {0}")]
    CacheMismatch(String),
    #[error("parameters do not match layer {index}: {reason}")]
    ParamMismatch { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self, NnError> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(NnError::InvalidTensor(format!(
                "shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        if shape.contains(&0) {
            return Err(NnError::InvalidTensor(format!(
                "shape {shape:?} has a zero dimension"
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Per-sample shape `(channels, electrodes, time)`.
    pub fn feature_shape(&self) -> FeatureShape {
        [self.shape[1], self.shape[2], self.shape[3]]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: [usize; 4]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    fn offset(&self, [b, c, h, w]: [usize; 4]) -> usize {
        let [_, cs, hs, ws] = self.shape;
        ((b * cs + c) * hs + h) * ws + w
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn reshaped(self, shape: [usize; 4]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), self.data.len());
        Self {
            shape,
            data: self.data,
        }
    }
}
