//! Proptest settings shared by the property targets.

/// Fixed-seed proptest configuration: runs are reproducible and leave no
/// regression files behind.
pub fn fixed(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5efe),
        failure_persistence: None,
        ..Default::default()
    }
}
