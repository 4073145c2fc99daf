//! Offline threshold calibration.
//!
//! Given per-frame PSNR scores from known in-domain and out-of-domain
//! streams, scan window lengths `tau = 1..=tau_max`, average each stream over
//! non-overlapping windows, and look for the smallest `tau` at which every
//! in-domain window mean lies strictly above every out-of-domain one. The
//! operating threshold is the midpoint of that gap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequential_mean;

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("empty input")]
    EmptyInput,
    #[error("{len} scores do not fill a single window of {tau}")]
    NoFullWindow { len: usize, tau: usize },
    #[error("window length tau must be at least 1")]
    InvalidTau,
    #[error("histogram needs at least one bin")]
    InvalidBins,
    #[error("histogram range [{lo}, {hi}] is empty")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("non-finite score {0}")]
    NonFinite(f64),
}

fn check_finite(scores: &[f64]) -> Result<(), CalibrationError> {
    match scores.iter().find(|s| !s.is_finite()) {
        Some(&s) => Err(CalibrationError::NonFinite(s)),
        None => Ok(()),
    }
}

/// Means of consecutive full windows of `tau`; a trailing partial window is
/// dropped.
pub fn windowed_means(scores: &[f64], tau: usize) -> Result<Vec<f64>, CalibrationError> {
    if tau == 0 {
        return Err(CalibrationError::InvalidTau);
    }
    if scores.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    if scores.len() < tau {
        return Err(CalibrationError::NoFullWindow { len: scores.len(), tau });
    }
    Ok(scores
        .chunks_exact(tau)
        .map(|chunk| sequential_mean(chunk.iter().copied()))
        .collect())
}

/// Fixed-width frequency table. Bin `i` covers `[lo + i*w, lo + (i+1)*w)`,
/// the last bin is closed on the right, and out-of-range values clamp to the
/// end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub label: String,
}

impl Histogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `(bin_lo, bin_hi)` of bin `i`.
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let hi = if i + 1 == self.counts.len() {
            self.hi
        } else {
            self.lo + (i + 1) as f64 * w
        };
        (self.lo + i as f64 * w, hi)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// CSV rows `bin_lo,bin_hi,count,label` with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,label\n");
        for (i, count) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_edges(i);
            out.push_str(&format!("{lo},{hi},{count},{}\n", self.label));
        }
        out
    }
}

pub fn build_histogram(scores: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram, CalibrationError> {
    if bins == 0 {
        return Err(CalibrationError::InvalidBins);
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CalibrationError::InvalidRange { lo, hi });
    }
    if scores.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    check_finite(scores)?;
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &s in scores {
        let idx = if s <= lo {
            0
        } else {
            (((s - lo) / w).floor() as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(Histogram {
        lo,
        hi,
        counts,
        label: String::new(),
    })
}

/// Default plotting range: `[floor(min), ceil(max)]` over all given sets,
/// widened to one unit when that would be empty.
pub fn default_range<'a>(sets: impl IntoIterator<Item = &'a [f64]>) -> Option<(f64, f64)> {
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in sets.into_iter().flatten() {
        min = min.min(*s);
        max = max.max(*s);
    }
    if !min.is_finite() || !max.is_finite() {
        return None;
    }
    let (lo, hi) = (min.floor(), max.ceil());
    Some(if hi > lo { (lo, hi) } else { (lo, lo + 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub separated: bool,
    /// `min(in) - max(out)`; positive iff the sets separate.
    pub margin: f64,
    pub min_in: f64,
    pub max_out: f64,
}

pub fn check_separation(in_means: &[f64], out_means: &[f64]) -> Result<Separation, CalibrationError> {
    if in_means.is_empty() || out_means.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    check_finite(in_means)?;
    check_finite(out_means)?;
    let min_in = in_means.iter().copied().fold(f64::INFINITY, f64::min);
    let max_out = out_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = min_in - max_out;
    Ok(Separation {
        separated: margin > 0.0,
        margin,
        min_in,
        max_out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPoint {
    pub tau: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub tau_min: Option<usize>,
    /// Midpoint of the gap at `tau_min`.
    pub threshold: Option<f64>,
    pub margin: Option<f64>,
    /// One point per scanned `tau` at which both sets still have a full window.
    pub margin_curve: Vec<MarginPoint>,
}

/// Margin at a single `tau`, or `None` when either set has no full window.
pub fn separation_at(in_scores: &[f64], out_scores: &[f64], tau: usize) -> Result<Option<Separation>, CalibrationError> {
    let windows = |s: &[f64]| match windowed_means(s, tau) {
        Ok(m) => Ok(Some(m)),
        Err(CalibrationError::NoFullWindow { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    match (windows(in_scores)?, windows(out_scores)?) {
        (Some(a), Some(b)) => check_separation(&a, &b).map(Some),
        _ => Ok(None),
    }
}

/// Scans every `tau` in `1..=tau_max`; the margin is not assumed monotone.
pub fn find_min_tau(in_scores: &[f64], out_scores: &[f64], tau_max: usize) -> Result<CalibrationResult, CalibrationError> {
    if in_scores.is_empty() || out_scores.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    if tau_max == 0 {
        return Err(CalibrationError::InvalidTau);
    }
    check_finite(in_scores)?;
    check_finite(out_scores)?;

    let mut result = CalibrationResult {
        tau_min: None,
        threshold: None,
        margin: None,
        margin_curve: Vec::new(),
    };
    let longest = tau_max.min(in_scores.len()).min(out_scores.len());
    for tau in 1..=longest {
        let Some(sep) = separation_at(in_scores, out_scores, tau)? else {
            break;
        };
        result.margin_curve.push(MarginPoint { tau, margin: sep.margin });
        if sep.separated && result.tau_min.is_none() {
            result.tau_min = Some(tau);
            result.threshold = Some(sep.max_out + (sep.min_in - sep.max_out) / 2.0);
            result.margin = Some(sep.margin);
        }
    }
    Ok(result)
}
