//! Deterministic EEG preprocessing.
//!
//! Filters are realised as cascades of second-order sections and applied
//! forward-backward (zero phase) by default. The default chain is
//! notch (off) → 0.5–50 Hz order-5 Butterworth band-pass → decimate by 2 →
//! 4 s imagery-window epochs.

mod butterworth;
mod epochs;
mod filtfilt;
mod pipeline;
mod resample;

pub use butterworth::{design_butterworth_bandpass, design_notch, Biquad, BiquadCascade};
pub use epochs::{epoch_extract, standardize, ChannelStats};
pub use filtfilt::{apply_causal, apply_notch, apply_zero_phase, pad_len};
pub use pipeline::{preprocess, FilterDirection, NotchConfig, PreprocessConfig};
pub use resample::downsample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("invalid filter spec: {0}")]
    InvalidFilter(String),
    #[error("signal too short for filtering: {len} samples, need more than {required}")]
    TooShort { len: usize, required: usize },
    #[error("invalid decimation factor {0}")]
    InvalidFactor(usize),
    #[error("channel count {channels} does not match {labels} labels")]
    LabelMismatch { channels: usize, labels: usize },
    #[error("data length {len} is not channels x samples ({channels} x {samples})")]
    ShapeMismatch {
        len: usize,
        channels: usize,
        samples: usize,
    },
    #[error("non-finite sample at channel {channel}, index {sample}")]
    NonFinite { channel: usize, sample: usize },
    #[error("trial {trial} (onset sample {onset}): window [{start}, {end}) exceeds recording of {len} samples")]
    WindowOutOfBounds {
        trial: usize,
        onset: usize,
        start: i64,
        end: i64,
        len: usize,
    },
    #[error("invalid epoch window: {0}")]
    InvalidWindow(String),
    #[error("cannot standardize an empty epoch set")]
    EmptyEpochs,
    #[error("channel {channel} ({label}) has zero variance in the training set")]
    ZeroVariance { channel: usize, label: String },
    #[error("epoch sets disagree on {0}")]
    Incompatible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    BandPass,
    Notch,
}

/// Parameters of an IIR design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub fs_hz: f64,
}

impl FilterSpec {
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, fs_hz: f64) -> Self {
        Self {
            kind: FilterKind::BandPass,
            order,
            low_hz,
            high_hz,
            fs_hz,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let nyquist = self.fs_hz / 2.0;
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(SignalError::InvalidFilter(format!(
                "sampling rate {} Hz",
                self.fs_hz
            )));
        }
        if self.order < 1 {
            return Err(SignalError::InvalidFilter("order must be >= 1".into()));
        }
        if !(self.low_hz > 0.0) {
            return Err(SignalError::InvalidFilter(format!(
                "low cutoff {} Hz must be > 0",
                self.low_hz
            )));
        }
        if !(self.high_hz < nyquist) {
            return Err(SignalError::InvalidFilter(format!(
                "high cutoff {} Hz must be below Nyquist {} Hz",
                self.high_hz, nyquist
            )));
        }
        if !(self.low_hz < self.high_hz) {
            return Err(SignalError::InvalidFilter(format!(
                "low cutoff {} Hz must be below high cutoff {} Hz",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }
}

/// Channels × samples matrix, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    data: Vec<f64>,
    n_channels: usize,
    n_samples: usize,
    fs_hz: f64,
    channel_labels: Vec<String>,
}

impl SignalBlock {
    pub fn new(
        data: Vec<f64>,
        n_channels: usize,
        fs_hz: f64,
        channel_labels: Vec<String>,
    ) -> Result<Self, SignalError> {
        if channel_labels.len() != n_channels {
            return Err(SignalError::LabelMismatch {
                channels: n_channels,
                labels: channel_labels.len(),
            });
        }
        let n_samples = data.len().checked_div(n_channels).unwrap_or(0);
        if n_channels * n_samples != data.len() {
            return Err(SignalError::ShapeMismatch {
                len: data.len(),
                channels: n_channels,
                samples: n_samples,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite {
                channel: i / n_samples.max(1),
                sample: i % n_samples.max(1),
            });
        }
        Ok(Self {
            data,
            n_channels,
            n_samples,
            fs_hz,
            channel_labels,
        })
    }

    /// Builds a block from per-channel rows with generated labels `ch00`, `ch01`, ...
    pub fn from_rows(rows: &[Vec<f64>], fs_hz: f64) -> Result<Self, SignalError> {
        let n_samples = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_samples) {
            return Err(SignalError::ShapeMismatch {
                len: bad.len(),
                channels: rows.len(),
                samples: n_samples,
            });
        }
        let labels = (0..rows.len()).map(|i| format!("ch{i:02}")).collect();
        Self::new(rows.concat(), rows.len(), fs_hz, labels)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same labels and rate, new per-channel rows of a possibly different length.
    pub(crate) fn with_rows(&self, data: Vec<f64>, fs_hz: f64) -> Self {
        let n_samples = data.len() / self.n_channels.max(1);
        Self {
            data,
            n_channels: self.n_channels,
            n_samples,
            fs_hz,
            channel_labels: self.channel_labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_rejects_label_mismatch_and_nan() {
        let err = SignalBlock::new(vec![0.0; 6], 2, 100.0, vec!["a".into()]).unwrap_err();
        assert!(matches!(err, SignalError::LabelMismatch { .. }));
        let err = SignalBlock::new(
            vec![0.0, 1.0, f64::NAN, 0.0],
            2,
            100.0,
            vec!["a".into(), "b".into()],
        )
        .unwrap_err();
        assert_eq!(
            err,
            SignalError::NonFinite {
                channel: 1,
                sample: 0
            }
        );
    }

    #[test]
    fn filter_spec_validation() {
        assert!(FilterSpec::bandpass(5, 0.5, 50.0, 500.0).validate().is_ok());
        assert!(FilterSpec::bandpass(0, 0.5, 50.0, 500.0).validate().is_err());
        assert!(FilterSpec::bandpass(5, 0.0, 50.0, 500.0).validate().is_err());
        assert!(FilterSpec::bandpass(5, 0.5, 250.0, 500.0).validate().is_err());
        assert!(FilterSpec::bandpass(5, 60.0, 50.0, 500.0).validate().is_err());
    }
}
