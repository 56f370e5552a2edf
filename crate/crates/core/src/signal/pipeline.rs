use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, EpochSet, Recording};

use super::{
    apply_causal, apply_notch, apply_zero_phase, design_butterworth_bandpass, downsample,
    epoch_extract, FilterSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterDirection {
    ZeroPhase,
    Causal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchConfig {
    pub freq_hz: f64,
    pub q: f64,
}

/// Preprocessing chain: notch (optional) → band-pass → decimate → epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Off by default: line noise is already notched at acquisition.
    pub notch: Option<NotchConfig>,
    pub bandpass_order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub direction: FilterDirection,
    pub downsample_factor: usize,
    /// Window start relative to trial onset. 2 s fixation + 4 s video + 4 s
    /// fixation puts the imagery period at 10 s.
    pub epoch_offset_s: f64,
    pub epoch_len_s: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            notch: None,
            bandpass_order: 5,
            low_hz: 0.5,
            high_hz: 50.0,
            direction: FilterDirection::ZeroPhase,
            downsample_factor: 2,
            epoch_offset_s: 10.0,
            epoch_len_s: 4.0,
        }
    }
}

pub fn preprocess(recording: &Recording, cfg: &PreprocessConfig) -> Result<EpochSet, DatasetError> {
    let mut signal = recording.signal().clone();
    if let Some(n) = cfg.notch {
        signal = apply_notch(&signal, n.freq_hz, n.q)?;
    }
    let spec = FilterSpec::bandpass(cfg.bandpass_order, cfg.low_hz, cfg.high_hz, signal.fs_hz());
    let cascade = design_butterworth_bandpass(&spec)?;
    signal = match cfg.direction {
        FilterDirection::ZeroPhase => apply_zero_phase(&cascade, &signal)?,
        FilterDirection::Causal => apply_causal(&cascade, &signal)?,
    };
    let decimated = downsample(&signal, cfg.downsample_factor)?;
    let rec = recording.with_decimated_signal(decimated, cfg.downsample_factor)?;
    Ok(epoch_extract(&rec, cfg.epoch_offset_s, cfg.epoch_len_s)?)
}
