use super::butterworth::{design_notch, Biquad, BiquadCascade};
use super::{SignalBlock, SignalError};

/// Edge extension length: three times the filter length (order + 1).
pub fn pad_len(cascade: &BiquadCascade) -> usize {
    3 * (cascade.order() + 1)
}

/// Transposed direct-form II state of each section in steady state for a
/// unit step at the cascade input.
fn step_state(sections: &[Biquad]) -> Vec<[f64; 2]> {
    let mut input = 1.0;
    sections
        .iter()
        .map(|s| {
            let y = s.dc_gain() * input;
            let z1 = y - s.b[0] * input;
            let z2 = s.b[2] * input - s.a[1] * y;
            input = y;
            [z1, z2]
        })
        .collect()
}

fn run_sections(sections: &[Biquad], init: &[[f64; 2]], scale: f64, x: &mut [f64]) {
    for (s, z0) in sections.iter().zip(init) {
        let [b0, b1, b2] = s.b;
        let [a1, a2] = s.a;
        let mut z1 = z0[0] * scale;
        let mut z2 = z0[1] * scale;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Forward-backward filtering of one channel with odd edge extension.
fn filtfilt_channel(sections: &[Biquad], zi: &[[f64; 2]], x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let (first, last) = (x[0], x[n - 1]);
    ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

    let x0 = ext[0];
    run_sections(sections, zi, x0, &mut ext);
    ext.reverse();
    let y0 = ext[0];
    run_sections(sections, zi, y0, &mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase application: net response |H|², no phase lag.
///
/// Each channel is extended at both ends by odd reflection of
/// [`pad_len`] samples, filtered forward from the steady state of its first
/// sample, reversed, filtered again, reversed and trimmed.
pub fn apply_zero_phase(
    cascade: &BiquadCascade,
    signal: &SignalBlock,
) -> Result<SignalBlock, SignalError> {
    let pad = pad_len(cascade);
    let n = signal.n_samples();
    if n <= pad {
        return Err(SignalError::TooShort {
            len: n,
            required: pad,
        });
    }
    let sections = cascade.scaled_sections();
    let zi = step_state(&sections);
    let mut out = Vec::with_capacity(signal.data().len());
    for c in 0..signal.n_channels() {
        out.extend(filtfilt_channel(&sections, &zi, signal.channel(c), pad));
    }
    Ok(signal.with_rows(out, signal.fs_hz()))
}

/// Single forward pass, initial state matched to the first sample.
pub fn apply_causal(
    cascade: &BiquadCascade,
    signal: &SignalBlock,
) -> Result<SignalBlock, SignalError> {
    if signal.n_samples() == 0 {
        return Err(SignalError::TooShort {
            len: 0,
            required: 0,
        });
    }
    let sections = cascade.scaled_sections();
    let zi = step_state(&sections);
    let mut out = signal.clone();
    for c in 0..signal.n_channels() {
        let row = out.channel_mut(c);
        let x0 = row[0];
        run_sections(&sections, &zi, x0, row);
    }
    Ok(out)
}

/// Zero-phase second-order notch.
pub fn apply_notch(signal: &SignalBlock, notch_hz: f64, q: f64) -> Result<SignalBlock, SignalError> {
    let notch = design_notch(notch_hz, q, signal.fs_hz())?;
    apply_zero_phase(&notch, signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{design_butterworth_bandpass, FilterSpec};
    use std::f64::consts::PI;

    fn bandpass() -> BiquadCascade {
        design_butterworth_bandpass(&FilterSpec::bandpass(5, 0.5, 50.0, 500.0)).unwrap()
    }

    fn sine(freq: f64, fs: f64, secs: f64, amp: f64) -> Vec<f64> {
        let n = (fs * secs) as usize;
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    /// Amplitude of a tone over the central half via projection on sin/cos.
    fn tone_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let n = x.len();
        let (lo, hi) = (n / 4, 3 * n / 4);
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate().take(hi).skip(lo) {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            s += v * ph.sin();
            c += v * ph.cos();
        }
        2.0 * (s * s + c * c).sqrt() / (hi - lo) as f64
    }

    #[test]
    fn dc_input_is_removed() {
        for amp in [1.0, -37.5, 1e4] {
            let block = SignalBlock::from_rows(&[vec![amp; 3000]], 500.0).unwrap();
            let out = apply_zero_phase(&bandpass(), &block).unwrap();
            let worst = out.channel(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-6 * amp.abs(), "amp {amp}: {worst}");
        }
    }

    #[test]
    fn passband_tone_keeps_amplitude_and_phase() {
        let x = sine(10.0, 500.0, 10.0, 3.0);
        let block = SignalBlock::from_rows(std::slice::from_ref(&x), 500.0).unwrap();
        let y = apply_zero_phase(&bandpass(), &block).unwrap();
        let amp = tone_amplitude(y.channel(0), 10.0, 500.0);
        assert!((amp / 3.0 - 1.0).abs() < 0.02, "{amp}");

        // cross-correlation peak at lag 0 over the centre
        let mid = x.len() / 2;
        let win = 500;
        let xc = |lag: i64| -> f64 {
            (mid - win..mid + win)
                .map(|i| x[i] * y.channel(0)[(i as i64 + lag) as usize])
                .sum()
        };
        let best = (-20..=20).max_by(|&a, &b| xc(a).total_cmp(&xc(b))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn stopband_tone_attenuated_forty_db() {
        let x = sine(100.0, 500.0, 10.0, 1.0);
        let block = SignalBlock::from_rows(&[x], 500.0).unwrap();
        let y = apply_zero_phase(&bandpass(), &block).unwrap();
        let amp = tone_amplitude(y.channel(0), 100.0, 500.0);
        assert!(20.0 * amp.log10() <= -40.0, "{amp}");
    }

    #[test]
    fn short_signal_rejected() {
        let c = bandpass();
        let block = SignalBlock::from_rows(&[vec![0.0; pad_len(&c)]], 500.0).unwrap();
        assert!(matches!(
            apply_zero_phase(&c, &block),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn notch_removes_line_noise_only() {
        let line = SignalBlock::from_rows(&[sine(60.0, 500.0, 10.0, 1.0)], 500.0).unwrap();
        let y = apply_notch(&line, 60.0, 30.0).unwrap();
        assert!(tone_amplitude(y.channel(0), 60.0, 500.0) < 0.01);

        let alpha = SignalBlock::from_rows(&[sine(10.0, 500.0, 10.0, 1.0)], 500.0).unwrap();
        let y = apply_notch(&alpha, 60.0, 30.0).unwrap();
        assert!((tone_amplitude(y.channel(0), 10.0, 500.0) - 1.0).abs() < 0.01);

        let zero = SignalBlock::from_rows(&[vec![0.0; 1000]], 500.0).unwrap();
        let y = apply_notch(&zero, 60.0, 30.0).unwrap();
        assert!(y.channel(0).iter().all(|&v| v == 0.0));

        assert!(apply_notch(&zero, 250.0, 30.0).is_err());
    }

    #[test]
    fn notch_far_from_centre_is_near_unity() {
        // |H|² of the zero-phase notch stays within 1 % of unity once the
        // distance from the centre exceeds six bandwidths.
        let (f0, q, fs) = (60.0, 30.0, 500.0);
        let n = design_notch(f0, q, fs).unwrap();
        let bw = f0 / q;
        for k in [6.0, 8.0, 10.0, 20.0] {
            for f in [f0 - k * bw, f0 + k * bw] {
                let g = n.magnitude(f, fs).powi(2);
                assert!((g - 1.0).abs() < 0.01, "f={f}: {g}");
            }
        }
    }

    #[test]
    fn causal_pass_lags() {
        let x = sine(10.0, 500.0, 4.0, 1.0);
        let block = SignalBlock::from_rows(&[x], 500.0).unwrap();
        let y = apply_causal(&bandpass(), &block).unwrap();
        assert_eq!(y.n_samples(), 2000);
        let amp = tone_amplitude(y.channel(0), 10.0, 500.0);
        assert!((amp - 1.0).abs() < 0.05);
    }
}
