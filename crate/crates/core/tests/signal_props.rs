mod config;

use proptest::prelude::*;
use sefe_core::dataset::{ClassLabel, Event, Recording};
use sefe_core::signal::{apply_zero_phase, design_butterworth_bandpass, epoch_extract, FilterSpec, SignalBlock};

fn sine(freq: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / fs + phase).sin())
        .collect()
}

proptest! {
    #![proptest_config(config::fixed(96))]

    #[test]
    fn designed_sections_are_stable_with_structural_zeros(
        order in 1usize..=8,
        low in 0.1f64..20.0,
        width in 2.0f64..150.0,
        fs in prop::sample::select(vec![125.0, 250.0, 500.0, 1000.0]),
    ) {
        let high = low + width;
        prop_assume!(high < 0.45 * fs);
        let c = design_butterworth_bandpass(&FilterSpec::bandpass(order, low, high, fs)).unwrap();
        prop_assert_eq!(c.order(), 2 * order);
        for s in &c.sections {
            prop_assert!(s.pole_magnitudes().iter().all(|m| *m < 1.0), "{:?}", s);
        }
        prop_assert!(c.magnitude(0.0, fs) < 1e-12);
        prop_assert!(c.magnitude(fs / 2.0, fs) < 1e-12);
    }
}

proptest! {
    #![proptest_config(config::fixed(24))]

    #[test]
    fn zero_phase_filtering_is_linear(
        x in prop::collection::vec(-5.0f64..5.0, 400),
        y in prop::collection::vec(-5.0f64..5.0, 400),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let c = design_butterworth_bandpass(&FilterSpec::bandpass(5, 0.5, 50.0, 250.0)).unwrap();
        let f = |v: &[f64]| apply_zero_phase(&c, &SignalBlock::from_rows(&[v.to_vec()], 250.0).unwrap()).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fm, fx, fy) = (f(&mix), f(&x), f(&y));
        let scale = fm.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..400 {
            let want = a * fx.data()[i] + b * fy.data()[i];
            prop_assert!((fm.data()[i] - want).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zero_phase_output_peaks_at_lag_zero(freq in 3.0f64..45.0, phase in 0.0f64..std::f64::consts::TAU) {
        let fs = 250.0;
        let n = 2500;
        let x = sine(freq, fs, n, phase);
        let c = design_butterworth_bandpass(&FilterSpec::bandpass(5, 0.5, 50.0, fs)).unwrap();
        let y = apply_zero_phase(&c, &SignalBlock::from_rows(std::slice::from_ref(&x), fs).unwrap()).unwrap();
        let y = y.channel(0);
        // lags up to a quarter period keep a unique correlation maximum
        let max_lag = ((fs / freq) / 4.0).floor() as i64;
        let xcorr = |lag: i64| -> f64 {
            (500..n - 500).map(|i| x[i] * y[(i as i64 + lag) as usize]).sum()
        };
        let best = (-max_lag..=max_lag)
            .max_by(|a, b| xcorr(*a).partial_cmp(&xcorr(*b)).unwrap())
            .unwrap();
        prop_assert_eq!(best, 0);
    }

    #[test]
    fn epoching_is_index_exact(
        gaps in prop::collection::vec(40usize..120, 1..8),
        // offset + len stays below the shortest gap so windows never overlap
        offset in 0usize..20,
        len in 1usize..20,
    ) {
        let fs = 100.0;
        let n_ch = 2;
        let mut onsets = Vec::new();
        let mut t = 5;
        for g in &gaps {
            onsets.push(t);
            t += g;
        }
        let n = t + offset + len + 1;
        let mut rows = vec![vec![0.0; n]; n_ch];
        // each trial's window carries trial, channel and sample index
        for (trial, &o) in onsets.iter().enumerate() {
            for (c, row) in rows.iter_mut().enumerate() {
                for k in 0..len {
                    row[o + offset + k] = (trial * 10_000 + c * 1_000 + k) as f64;
                }
            }
        }
        let events = onsets
            .iter()
            .enumerate()
            .map(|(i, &sample)| Event { sample, label: ClassLabel::ALL[i % 3] })
            .collect();
        let rec = Recording::new("S01", SignalBlock::from_rows(&rows, fs).unwrap(), events).unwrap();
        let set = epoch_extract(&rec, offset as f64 / fs, len as f64 / fs).unwrap();
        prop_assert_eq!(set.n_trials(), onsets.len());
        prop_assert_eq!(set.n_samples(), len);
        for trial in 0..onsets.len() {
            let e = set.epoch(trial);
            for c in 0..n_ch {
                for k in 0..len {
                    prop_assert_eq!(e[c * len + k], (trial * 10_000 + c * 1_000 + k) as f64);
                }
            }
        }
    }
}
