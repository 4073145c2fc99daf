//! Runtime out-of-domain detection from reconstruction error.
//!
//! A reconstruction source (a trained decoder, or the deterministic
//! [`reconstructor`] stand-in) reproduces each input frame. The per-frame
//! PSNR between input and reconstruction is the domain score: frames similar
//! to the training distribution reconstruct well and score high.
//!
//! Single-frame scores overlap between domains, so the [`monitor`] averages
//! them over tumbling windows of `tau` frames before classifying. The
//! [`calibration`] module finds the smallest `tau` at which windowed in-domain
//! and out-of-domain means separate completely and places the threshold in
//! the middle of the gap. [`analysis`] relates PSNR to segmentation accuracy
//! (mIoU) per domain group.

pub mod analysis;
pub mod calibration;
pub mod image_io;
pub mod metrics;
pub mod monitor;
pub mod reconstructor;

pub use analysis::{group_summary, regress, windowed_pairs, GroupSummary, LinearFit, RegressionResult};
pub use calibration::{
    build_histogram, check_separation, find_min_tau, windowed_means, CalibrationResult, Histogram,
    Separation,
};
pub use image_io::{load_image, load_label_map, write_image, write_label_map, Image, LabelMap};
pub use metrics::{combined_loss, confusion, miou, mse, psnr, ConfusionMatrix, LossWeights};
pub use monitor::{decision_latency, Monitor, ScoreRecord, Verdict, WindowMode, WindowVerdict};
pub use reconstructor::{generate_corpus, prng_next, reconstruct, CorpusSpec, Shift, SplitMix64, StandInConfig};

/// Arithmetic mean with left-to-right summation.
///
/// Every windowed mean in the crate goes through this so that stream and
/// batch paths agree bit-for-bit.
pub(crate) fn sequential_mean<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}
