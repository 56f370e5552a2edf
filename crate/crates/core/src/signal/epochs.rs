use crate::dataset::{EpochSet, Recording};

use super::SignalError;

/// Cuts one epoch per trial-onset marker: samples
/// `[onset + offset, onset + offset + len)`, with offset and length given in
/// seconds and rounded to the nearest sample.
pub fn epoch_extract(
    recording: &Recording,
    window_offset_s: f64,
    window_len_s: f64,
) -> Result<EpochSet, SignalError> {
    let signal = recording.signal();
    let fs = signal.fs_hz();
    if !(window_len_s > 0.0 && window_len_s.is_finite() && window_offset_s.is_finite()) {
        return Err(SignalError::InvalidWindow(format!(
            "offset {window_offset_s} s, length {window_len_s} s"
        )));
    }
    let offset = (window_offset_s * fs).round() as i64;
    let len = (window_len_s * fs).round() as i64;
    if len < 1 {
        return Err(SignalError::InvalidWindow(format!(
            "length {window_len_s} s is shorter than one sample at {fs} Hz"
        )));
    }
    let n = signal.n_samples();
    let n_ch = signal.n_channels();
    let events = recording.events();
    let mut data = Vec::with_capacity(events.len() * n_ch * len as usize);
    for (trial, e) in events.iter().enumerate() {
        let start = e.sample as i64 + offset;
        let end = start + len;
        if start < 0 || end > n as i64 {
            return Err(SignalError::WindowOutOfBounds {
                trial,
                onset: e.sample,
                start,
                end,
                len: n,
            });
        }
        for c in 0..n_ch {
            data.extend_from_slice(&signal.channel(c)[start as usize..end as usize]);
        }
    }
    EpochSet::new(
        data,
        n_ch,
        len as usize,
        events.iter().map(|e| e.label).collect(),
        vec![recording.subject_id().to_string(); events.len()],
        signal.channel_labels().to_vec(),
        fs,
    )
    .map_err(|e| SignalError::InvalidWindow(e.to_string()))
}

/// Per-channel mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Statistics over every trial and sample of `set`.
    pub fn fit(set: &EpochSet) -> Result<Self, SignalError> {
        if set.is_empty() || set.n_samples() == 0 {
            return Err(SignalError::EmptyEpochs);
        }
        let (n_ch, n_s) = (set.n_channels(), set.n_samples());
        let count = (set.n_trials() * n_s) as f64;
        let mut mean = vec![0.0; n_ch];
        for t in 0..set.n_trials() {
            let ep = set.epoch(t);
            for (c, m) in mean.iter_mut().enumerate() {
                *m += ep[c * n_s..(c + 1) * n_s].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n_ch];
        for t in 0..set.n_trials() {
            let ep = set.epoch(t);
            for c in 0..n_ch {
                var[c] += ep[c * n_s..(c + 1) * n_s]
                    .iter()
                    .map(|v| (v - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        let mut std = Vec::with_capacity(n_ch);
        for (c, v) in var.into_iter().enumerate() {
            let s = (v / count).sqrt();
            if !(s > 0.0) {
                return Err(SignalError::ZeroVariance {
                    channel: c,
                    label: set.channel_labels()[c].clone(),
                });
            }
            std.push(s);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, set: &EpochSet) -> Result<EpochSet, SignalError> {
        if set.n_channels() != self.mean.len() {
            return Err(SignalError::Incompatible(format!(
                "channel count ({} vs {})",
                set.n_channels(),
                self.mean.len()
            )));
        }
        let n_s = set.n_samples();
        let mut out = set.clone();
        for chunk in out.data_mut().chunks_mut(n_s.max(1)).enumerate() {
            let (row, values) = chunk;
            let c = row % self.mean.len();
            let (m, s) = (self.mean[c], self.std[c]);
            values.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}

/// Scales `train` and every set in `others` by the training set's
/// per-channel statistics.
pub fn standardize(
    train: &EpochSet,
    others: &[EpochSet],
) -> Result<(EpochSet, Vec<EpochSet>), SignalError> {
    let stats = ChannelStats::fit(train)?;
    let train_out = stats.apply(train)?;
    let others_out = others
        .iter()
        .map(|o| stats.apply(o))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((train_out, others_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, Event};
    use crate::signal::SignalBlock;

    fn recording(n: usize, fs: f64, onsets: &[(usize, ClassLabel)]) -> Recording {
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|c| (0..n).map(|i| (c * 100_000 + i) as f64).collect())
            .collect();
        let sig = SignalBlock::from_rows(&rows, fs).unwrap();
        let events = onsets
            .iter()
            .map(|&(sample, label)| Event { sample, label })
            .collect();
        Recording::new("s1", sig, events).unwrap()
    }

    #[test]
    fn imagery_window_position() {
        let rec = recording(3600, 250.0, &[(0, ClassLabel::Hovering)]);
        let ep = epoch_extract(&rec, 10.0, 4.0).unwrap();
        assert_eq!(ep.n_trials(), 1);
        assert_eq!(ep.n_samples(), 1000);
        assert_eq!(ep.epoch(0)[0], 2500.0);
        assert_eq!(ep.epoch(0)[999], 3499.0);
        assert_eq!(ep.epoch(0)[1000], 102_500.0);
        assert_eq!(ep.labels(), &[ClassLabel::Hovering]);
    }

    #[test]
    fn full_window_equals_recording() {
        let rec = recording(500, 250.0, &[(0, ClassLabel::FallIn)]);
        let ep = epoch_extract(&rec, 0.0, 2.0).unwrap();
        assert_eq!(ep.epoch(0), rec.signal().data());
    }

    #[test]
    fn out_of_bounds_names_trial() {
        let rec = recording(
            3600,
            250.0,
            &[(0, ClassLabel::FallIn), (200, ClassLabel::SpreadOut)],
        );
        let err = epoch_extract(&rec, 10.0, 4.0).unwrap_err();
        assert!(matches!(
            err,
            SignalError::WindowOutOfBounds { trial: 1, onset: 200, .. }
        ));
        assert!(err.to_string().contains("trial 1"));
    }

    fn set(values: &[[f64; 4]]) -> EpochSet {
        let n = values.len();
        EpochSet::new(
            values.concat(),
            2,
            2,
            vec![ClassLabel::SpreadOut; n],
            vec!["x".into(); n],
            vec!["a".into(), "b".into()],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn standardize_train_moments() {
        let train = set(&[[-1.0, 1.0, 3.0, 5.0], [1.0, -1.0, 7.0, 9.0]]);
        let (out, _) = standardize(&train, &[]).unwrap();
        assert_eq!(out.epoch(0)[..2], [-1.0, 1.0]);
        let stats = ChannelStats::fit(&out).unwrap();
        for c in 0..2 {
            assert!(stats.mean[c].abs() < 1e-6);
            assert!((stats.std[c] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn held_out_uses_train_statistics() {
        let train = set(&[[-1.0, 1.0, 3.0, 5.0], [1.0, -1.0, 7.0, 9.0]]);
        let shifted = set(&[[9.0, 11.0, 13.0, 15.0]]);
        let (_, others) = standardize(&train, std::slice::from_ref(&shifted)).unwrap();
        let own = ChannelStats::fit(&others[0]).unwrap();
        assert!(own.mean[0].abs() > 1.0);
        let (self_std, _) = standardize(&shifted, &[]).unwrap();
        assert_ne!(self_std, others[0]);
    }

    #[test]
    fn zero_variance_channel_named() {
        let train = set(&[[1.0, 2.0, 4.0, 4.0], [3.0, 0.0, 4.0, 4.0]]);
        match standardize(&train, &[]) {
            Err(SignalError::ZeroVariance { channel, label }) => {
                assert_eq!(channel, 1);
                assert_eq!(label, "b");
            }
            other => panic!("{other:?}"),
        }
    }
}
