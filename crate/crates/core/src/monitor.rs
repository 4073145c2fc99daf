//! Online windowed domain monitor.
//!
//! Per-frame PSNR scores are noisy, so verdicts are made on the mean PSNR of
//! a window of `tau` frames. In tumbling mode (the default) windows do not
//! overlap and one verdict is produced every `tau` frames; in sliding mode a
//! verdict is produced on every frame once `tau` frames are held.
//!
//! A window is in-domain iff its mean PSNR is at or above the threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequential_mean;

/// PSNR substituted for frames whose reconstruction is exact.
pub const DEFAULT_PSNR_CAP: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("frame_id {got} is not greater than previous frame_id {previous}")]
    NonMonotonicFrameId { previous: u64, got: u64 },
    #[error("frame {frame_id} has a NaN psnr")]
    NanScore { frame_id: u64 },
    #[error("window length tau must be at least 1")]
    InvalidTau,
    #[error("frame rate {0} Hz must be positive")]
    NonPositiveFrameRate(f64),
}

/// One frame's domain score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub frame_id: u64,
    #[serde(default)]
    pub domain: Option<String>,
    pub psnr: f64,
    #[serde(default)]
    pub miou: Option<f64>,
    /// Set when `psnr` is the cap substituted for an exact reconstruction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub capped: bool,
}

impl ScoreRecord {
    pub fn new(frame_id: u64, psnr: f64) -> Self {
        Self {
            frame_id,
            domain: None,
            psnr,
            miou: None,
            capped: false,
        }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    pub fn with_miou(mut self, miou: f64) -> Self {
        self.miou = Some(miou);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    InDomain,
    OutOfDomain,
    Uncalibrated,
}

impl Verdict {
    pub fn classify(mean_psnr: f64, threshold: Option<f64>) -> Self {
        match threshold {
            None => Verdict::Uncalibrated,
            Some(t) if mean_psnr >= t => Verdict::InDomain,
            Some(_) => Verdict::OutOfDomain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    pub window_index: u64,
    pub first_frame: u64,
    pub last_frame: u64,
    pub mean_psnr: f64,
    pub verdict: Verdict,
    /// True only for a short window emitted by [`Monitor::flush`].
    pub partial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    #[default]
    Tumbling,
    Sliding,
}

/// Streaming state for one frame sequence. Pushes must be serialized.
#[derive(Debug, Clone)]
pub struct Monitor {
    tau: usize,
    mode: WindowMode,
    threshold: Option<f64>,
    cap: f64,
    buffer: VecDeque<(u64, f64)>,
    last_frame: Option<u64>,
    next_window: u64,
}

impl Monitor {
    pub fn new(tau: usize, mode: WindowMode, threshold: Option<f64>) -> Result<Self, MonitorError> {
        if tau == 0 {
            return Err(MonitorError::InvalidTau);
        }
        Ok(Self {
            tau,
            mode,
            threshold,
            cap: DEFAULT_PSNR_CAP,
            buffer: VecDeque::with_capacity(tau),
            last_frame: None,
            next_window: 0,
        })
    }

    /// Replaces the value substituted for infinite PSNR.
    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn mode(&self) -> WindowMode {
        self.mode
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn push(&mut self, rec: &ScoreRecord) -> Result<Option<WindowVerdict>, MonitorError> {
        if let Some(previous) = self.last_frame {
            if rec.frame_id <= previous {
                return Err(MonitorError::NonMonotonicFrameId {
                    previous,
                    got: rec.frame_id,
                });
            }
        }
        if rec.psnr.is_nan() {
            return Err(MonitorError::NanScore { frame_id: rec.frame_id });
        }
        self.last_frame = Some(rec.frame_id);
        let score = if rec.psnr.is_infinite() && rec.psnr > 0.0 {
            self.cap
        } else {
            rec.psnr
        };
        self.buffer.push_back((rec.frame_id, score));

        match self.mode {
            WindowMode::Tumbling if self.buffer.len() == self.tau => {
                let v = self.emit(false);
                self.buffer.clear();
                Ok(Some(v))
            }
            WindowMode::Sliding if self.buffer.len() > self.tau => {
                self.buffer.pop_front();
                Ok(Some(self.emit(false)))
            }
            WindowMode::Sliding if self.buffer.len() == self.tau => Ok(Some(self.emit(false))),
            _ => Ok(None),
        }
    }

    /// Emits a partial verdict over whatever a tumbling window holds.
    /// Sliding monitors have no pending window and always return `None`.
    pub fn flush(&mut self) -> Option<WindowVerdict> {
        if self.mode == WindowMode::Sliding || self.buffer.is_empty() {
            return None;
        }
        let v = self.emit(true);
        self.buffer.clear();
        Some(v)
    }

    fn emit(&mut self, partial: bool) -> WindowVerdict {
        let mean_psnr = sequential_mean(self.buffer.iter().map(|&(_, s)| s));
        let v = WindowVerdict {
            window_index: self.next_window,
            first_frame: self.buffer.front().map(|&(f, _)| f).unwrap_or_default(),
            last_frame: self.buffer.back().map(|&(f, _)| f).unwrap_or_default(),
            mean_psnr,
            verdict: Verdict::classify(mean_psnr, self.threshold),
            partial,
        };
        self.next_window += 1;
        v
    }
}

/// Seconds of stream needed for one verdict: `tau / frame_rate`.
pub fn decision_latency(tau: usize, frame_rate: f64) -> Result<f64, MonitorError> {
    if frame_rate.is_nan() || frame_rate <= 0.0 {
        return Err(MonitorError::NonPositiveFrameRate(frame_rate));
    }
    Ok(tau as f64 / frame_rate)
}
