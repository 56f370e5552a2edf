//! Subject-independent EEG decoding toolkit.
//!
//! The crate is organised along the processing chain:
//!
//! ```text
//! dataset::synth / container   recordings (continuous signal + trial markers)
//!   └─ signal                  notch → zero-phase Butterworth band-pass → decimate → epoch
//!        └─ decoders           DeepConvNet / ShallowConvNet / EEGNet stacks, optional SEFE block
//!             └─ nn            layer primitives, forward/backward, parameter store
//!                  └─ train    Adam training loop, leave-one-subject-out harness, reports
//!                       └─ stats   Shapiro–Wilk, Levene, paired t, Bonferroni
//! ```
//!
//! SEFE (subepoch-wise feature encoder) is a pair of 1×1 convolutions with a
//! ReLU between them, inserted between a backbone's final feature map and its
//! dense classifier. Because the kernels are 1×1 the block acts on every
//! temporal position of the feature map independently.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod decoders;
pub mod nn;
pub mod signal;
pub mod stats;
pub mod train;

pub(crate) mod seed;
