use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FilterKind, FilterSpec, SignalError};

/// One second-order section `(b0 + b1 z⁻¹ + b2 z⁻²) / (1 + a1 z⁻¹ + a2 z⁻²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z2;
        num / den
    }

    /// Pole magnitudes (roots of `z² + a1 z + a2`).
    pub fn pole_magnitudes(&self) -> [f64; 2] {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        let p1 = (-a1 + disc) / 2.0;
        let p2 = (-a1 - disc) / 2.0;
        [p1.norm(), p2.norm()]
    }

    pub fn is_stable(&self) -> bool {
        self.pole_magnitudes().iter().all(|&m| m < 1.0)
    }

    /// DC gain `H(1)`.
    pub(crate) fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Cascade of second-order sections followed by a scalar gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
    pub gain: f64,
}

impl BiquadCascade {
    /// Order of the realised digital transfer function.
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Complex response at `freq_hz` for sampling rate `fs_hz`.
    pub fn response(&self, freq_hz: f64, fs_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(self.gain, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.response(freq_hz, fs_hz).norm()
    }

    /// Sections with the overall gain folded into the first numerator.
    pub(crate) fn scaled_sections(&self) -> Vec<Biquad> {
        let mut out = self.sections.clone();
        if let Some(first) = out.first_mut() {
            for b in &mut first.b {
                *b *= self.gain;
            }
        }
        out
    }
}

/// Order-`order` Butterworth band-pass, bilinear transform with prewarped edges.
///
/// The analog low-pass prototype poles are mapped through the low-pass to
/// band-pass substitution `s → (s² + Ω₀²) / (s·B)`, giving `2·order` poles,
/// `order` zeros at the origin and `order` at infinity. After the bilinear
/// transform those zeros land at z = 1 and z = −1, so every section has the
/// numerator `1 − z⁻²` and the DC / Nyquist nulls are exact. The gain is set
/// for unit magnitude at the geometric centre frequency.
pub fn design_butterworth_bandpass(spec: &FilterSpec) -> Result<BiquadCascade, SignalError> {
    if spec.kind != FilterKind::BandPass {
        return Err(SignalError::InvalidFilter(
            "design_butterworth_bandpass needs a band-pass spec".into(),
        ));
    }
    spec.validate()?;
    let n = spec.order;
    let fs = spec.fs_hz;
    let prewarp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let w_lo = prewarp(spec.low_hz);
    let w_hi = prewarp(spec.high_hz);
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut analog = Vec::with_capacity(2 * n);
    for k in 0..n {
        let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        analog.push(half + disc);
        analog.push(half - disc);
    }

    let two_fs = 2.0 * fs;
    let digital: Vec<Complex64> = analog
        .iter()
        .map(|&s| (two_fs + s) / (two_fs - s))
        .collect();

    let scale = digital.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(1.0);
    let mut complex_upper: Vec<Complex64> = digital.iter().copied().filter(|p| p.im > tol).collect();
    let mut real: Vec<f64> = digital
        .iter()
        .filter(|p| p.im.abs() <= tol)
        .map(|p| p.re)
        .collect();
    if !real.len().is_multiple_of(2) || complex_upper.len() * 2 + real.len() != 2 * n {
        return Err(SignalError::InvalidFilter(
            "pole pairing failed; cutoffs too close to 0 or Nyquist".into(),
        ));
    }

    let mut sections = Vec::with_capacity(n);
    complex_upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);
    for p in &complex_upper {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-2.0 * p.re, p.norm_sqr()],
        });
    }
    for pair in real.chunks(2) {
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [-(pair[0] + pair[1]), pair[0] * pair[1]],
        });
    }
    // poles closest to the unit circle last
    sections.sort_by(|x, y| {
        let mx = x.pole_magnitudes()[0].max(x.pole_magnitudes()[1]);
        let my = y.pole_magnitudes()[0].max(y.pole_magnitudes()[1]);
        mx.total_cmp(&my)
    });

    let mut cascade = BiquadCascade {
        sections,
        gain: 1.0,
    };
    let centre_hz = (w0_sq.sqrt() / two_fs).atan() * fs / PI;
    cascade.gain = 1.0 / cascade.magnitude(centre_hz, fs);
    Ok(cascade)
}

/// Second-order IIR notch with −3 dB bandwidth `notch_hz / q`.
pub fn design_notch(notch_hz: f64, q: f64, fs_hz: f64) -> Result<BiquadCascade, SignalError> {
    if !(notch_hz > 0.0 && notch_hz < fs_hz / 2.0) {
        return Err(SignalError::InvalidFilter(format!(
            "notch frequency {notch_hz} Hz must lie in (0, {}) Hz",
            fs_hz / 2.0
        )));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(SignalError::InvalidFilter(format!("quality factor {q}")));
    }
    let w0 = 2.0 * PI * notch_hz / fs_hz;
    let bw = w0 / q;
    let g = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    Ok(BiquadCascade {
        sections: vec![Biquad {
            b: [g, -2.0 * g * c, g],
            a: [-2.0 * g * c, 2.0 * g - 1.0],
        }],
        gain: 1.0,
    })
}
