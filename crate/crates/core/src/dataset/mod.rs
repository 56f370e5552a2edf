//! Recordings, epoch sets, on-disk containers, LOSO fold planning and the
//! synthetic multi-subject generator.

mod container;
mod folds;
mod synth;

pub use container::{read_epochs, read_recording, write_epochs, write_recording, SCHEMA_VERSION};
pub use folds::{make_loso_folds, split_train_val, Fold, FoldPlan};
pub use synth::{synth_generate, synth_subject, SynthConfig, TrialTiming};

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{SignalBlock, SignalError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("truncated payload {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        found: u64,
    },
    #[error("{channels} channels but {labels} channel labels")]
    ChannelLabelMismatch { channels: usize, labels: usize },
    #[error("malformed events file {path}: line {line}: {reason}")]
    MalformedEvents {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unknown event code {0}")]
    UnknownCode(i64),
    #[error("event {index} at sample {sample} is outside a signal of {len} samples")]
    EventOutOfBounds {
        index: usize,
        sample: usize,
        len: usize,
    },
    #[error("event {index} at sample {sample} does not follow the previous event")]
    EventsNotIncreasing { index: usize, sample: usize },
    #[error("sample {sample} of channel {channel} is not representable as f32 ({value})")]
    PrecisionLoss {
        channel: usize,
        sample: usize,
        value: f64,
    },
    #[error("LOSO needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("split ratio {0} must lie in (0, 1)")]
    InvalidRatio(f64),
    #[error("class {label} has {count} trial(s); at least 2 are needed to split")]
    ClassTooSmall { label: ClassLabel, count: usize },
    #[error("epoch data invalid: {0}")]
    InvalidEpochs(String),
    #[error("invalid synthetic config: {0}")]
    InvalidSynthConfig(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// The three imagined drone-swarm formations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassLabel {
    SpreadOut = 0,
    FallIn = 1,
    Hovering = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [Self::SpreadOut, Self::FallIn, Self::Hovering];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: i64) -> Result<Self, DatasetError> {
        match code {
            0 => Ok(Self::SpreadOut),
            1 => Ok(Self::FallIn),
            2 => Ok(Self::Hovering),
            other => Err(DatasetError::UnknownCode(other)),
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SpreadOut => "spread-out",
            Self::FallIn => "fall-in",
            Self::Hovering => "hovering",
        })
    }
}

/// Trial onset marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub sample: usize,
    pub label: ClassLabel,
}

/// One subject's continuous signal with trial-onset markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    subject_id: String,
    signal: SignalBlock,
    events: Vec<Event>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        signal: SignalBlock,
        events: Vec<Event>,
    ) -> Result<Self, DatasetError> {
        let len = signal.n_samples();
        for (i, e) in events.iter().enumerate() {
            if e.sample >= len {
                return Err(DatasetError::EventOutOfBounds {
                    index: i,
                    sample: e.sample,
                    len,
                });
            }
            if i > 0 && e.sample <= events[i - 1].sample {
                return Err(DatasetError::EventsNotIncreasing {
                    index: i,
                    sample: e.sample,
                });
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            signal,
            events,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn signal(&self) -> &SignalBlock {
        &self.signal
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Replaces the signal, keeping markers. The new signal must have the same
    /// sampling rate and length (e.g. a filtered copy).
    pub fn with_signal(&self, signal: SignalBlock) -> Result<Self, DatasetError> {
        Self::new(self.subject_id.clone(), signal, self.events.clone())
    }

    /// Replaces a decimated signal, mapping marker positions to the new rate.
    pub fn with_decimated_signal(
        &self,
        signal: SignalBlock,
        factor: usize,
    ) -> Result<Self, DatasetError> {
        let last = signal.n_samples().saturating_sub(1);
        let events = self
            .events
            .iter()
            .map(|e| Event {
                sample: ((e.sample + factor / 2) / factor).min(last),
                label: e.label,
            })
            .collect();
        Self::new(self.subject_id.clone(), signal, events)
    }
}

/// Trials × channels × samples with per-trial labels and subject tags.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    data: Vec<f64>,
    n_trials: usize,
    n_channels: usize,
    n_samples: usize,
    labels: Vec<ClassLabel>,
    subject_ids: Vec<String>,
    channel_labels: Vec<String>,
    fs_hz: f64,
}

impl EpochSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        data: Vec<f64>,
        n_channels: usize,
        n_samples: usize,
        labels: Vec<ClassLabel>,
        subject_ids: Vec<String>,
        channel_labels: Vec<String>,
        fs_hz: f64,
    ) -> Result<Self, DatasetError> {
        let n_trials = labels.len();
        if subject_ids.len() != n_trials {
            return Err(DatasetError::InvalidEpochs(format!(
                "{} labels but {} subject tags",
                n_trials,
                subject_ids.len()
            )));
        }
        if channel_labels.len() != n_channels {
            return Err(DatasetError::ChannelLabelMismatch {
                channels: n_channels,
                labels: channel_labels.len(),
            });
        }
        if data.len() != n_trials * n_channels * n_samples {
            return Err(DatasetError::InvalidEpochs(format!(
                "data length {} != {} x {} x {}",
                data.len(),
                n_trials,
                n_channels,
                n_samples
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::InvalidEpochs("non-finite value".into()));
        }
        Ok(Self {
            data,
            n_trials,
            n_channels,
            n_samples,
            labels,
            subject_ids,
            channel_labels,
            fs_hz,
        })
    }

    pub fn n_trials(&self) -> usize {
        self.n_trials
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

    pub fn is_empty(&self) -> bool {
        self.n_trials == 0
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn trial_len(&self) -> usize {
        self.n_channels * self.n_samples
    }

    /// Channels × samples slice of one trial.
    pub fn epoch(&self, i: usize) -> &[f64] {
        let len = self.trial_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Distinct subject tags, sorted.
    pub fn subjects(&self) -> BTreeSet<&str> {
        self.subject_ids.iter().map(String::as_str).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let len = self.trial_len();
        let mut data = Vec::with_capacity(indices.len() * len);
        for &i in indices {
            data.extend_from_slice(self.epoch(i));
        }
        Self {
            data,
            n_trials: indices.len(),
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            channel_labels: self.channel_labels.clone(),
            fs_hz: self.fs_hz,
        }
    }

    /// Pools several sets trial-wise, in order.
    pub fn concat(sets: &[&EpochSet]) -> Result<Self, DatasetError> {
        let first = sets
            .first()
            .ok_or_else(|| DatasetError::InvalidEpochs("nothing to concatenate".into()))?;
        let mut out = Self {
            data: Vec::new(),
            n_trials: 0,
            n_channels: first.n_channels,
            n_samples: first.n_samples,
            labels: Vec::new(),
            subject_ids: Vec::new(),
            channel_labels: first.channel_labels.clone(),
            fs_hz: first.fs_hz,
        };
        for s in sets {
            if s.n_channels != out.n_channels || s.n_samples != out.n_samples {
                return Err(DatasetError::InvalidEpochs(format!(
                    "shape {}x{} does not match {}x{}",
                    s.n_channels, s.n_samples, out.n_channels, out.n_samples
                )));
            }
            out.data.extend_from_slice(&s.data);
            out.labels.extend_from_slice(&s.labels);
            out.subject_ids.extend(s.subject_ids.iter().cloned());
            out.n_trials += s.n_trials;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: usize) -> SignalBlock {
        SignalBlock::from_rows(&[vec![0.0; n]], 100.0).unwrap()
    }

    #[test]
    fn recording_event_invariants() {
        let ev = |s| Event {
            sample: s,
            label: ClassLabel::FallIn,
        };
        assert!(Recording::new("a", block(10), vec![ev(0), ev(9)]).is_ok());
        assert!(matches!(
            Recording::new("a", block(10), vec![ev(10)]),
            Err(DatasetError::EventOutOfBounds { index: 0, .. })
        ));
        assert!(matches!(
            Recording::new("a", block(10), vec![ev(3), ev(3)]),
            Err(DatasetError::EventsNotIncreasing { index: 1, .. })
        ));
        assert!(Recording::new("a", block(10), vec![]).is_ok());
    }

    #[test]
    fn class_codes_are_fixed() {
        assert_eq!(ClassLabel::SpreadOut.code(), 0);
        assert_eq!(ClassLabel::FallIn.code(), 1);
        assert_eq!(ClassLabel::Hovering.code(), 2);
        assert!(matches!(
            ClassLabel::from_code(3),
            Err(DatasetError::UnknownCode(3))
        ));
    }

    #[test]
    fn subset_and_concat() {
        let set = EpochSet::new(
            (0..12).map(f64::from).collect(),
            1,
            2,
            ClassLabel::ALL.repeat(2),
            ["a", "a", "a", "b", "b", "b"].map(String::from).to_vec(),
            vec!["c".into()],
            10.0,
        )
        .unwrap();
        let s = set.subset(&[5, 0]);
        assert_eq!(s.data(), &[10.0, 11.0, 0.0, 1.0]);
        assert_eq!(s.labels(), &[ClassLabel::Hovering, ClassLabel::SpreadOut]);
        let c = EpochSet::concat(&[&s, &s]).unwrap();
        assert_eq!(c.n_trials(), 4);
        assert_eq!(c.subjects().len(), 2);
        assert_eq!(set.class_counts(), [2, 2, 2]);
    }
}
