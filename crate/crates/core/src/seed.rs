//! Positional seed derivation shared by the generator and the LOSO harness.

/// SplitMix64 finaliser.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a master seed together with an ordered list of indices.
pub(crate) fn derive(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}
