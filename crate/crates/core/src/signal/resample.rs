use super::{SignalBlock, SignalError};

/// Keeps every `factor`-th sample starting at index 0.
///
/// No anti-alias filtering happens here; the band-pass upstream is expected
/// to have removed content above the new Nyquist.
pub fn downsample(signal: &SignalBlock, factor: usize) -> Result<SignalBlock, SignalError> {
    if factor < 1 {
        return Err(SignalError::InvalidFactor(factor));
    }
    let mut out = Vec::with_capacity(signal.data().len().div_ceil(factor));
    for c in 0..signal.n_channels() {
        out.extend(signal.channel(c).iter().step_by(factor));
    }
    Ok(signal.with_rows(out, signal.fs_hz() / factor as f64))
}
