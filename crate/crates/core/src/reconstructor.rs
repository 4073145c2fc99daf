//! Deterministic stand-in for a learned reconstruction decoder, and a
//! seeded synthetic corpus with a controllable domain shift.
//!
//! The stand-in is a block-average codec: each `k x k` block collapses to its
//! mean, the mean is quantized to `b` bits, and the block is expanded back by
//! nearest-neighbour upsampling. Smooth content survives this bottleneck
//! almost unchanged while high-frequency content (noise) is destroyed, which
//! is the behaviour a compressive decoder trained on one domain shows on
//! inputs from another.
//!
//! For reference, a 3x768x1280 input with a 256x48x80 bottleneck keeps
//! about 0.33 of its elements. `block = 2` keeps 1/4 before quantization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_io::Image;

#[derive(Debug, Error, PartialEq)]
pub enum ReconstructorError {
    #[error("block size must be at least 1")]
    InvalidBlock,
    #[error("quantization depth {0} outside 1..=8")]
    InvalidQuantBits(u32),
    #[error("invalid corpus spec: {0}")]
    InvalidCorpus(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandInConfig {
    block: usize,
    quant_bits: u32,
}

impl StandInConfig {
    pub fn new(block: usize, quant_bits: u32) -> Result<Self, ReconstructorError> {
        if block == 0 {
            return Err(ReconstructorError::InvalidBlock);
        }
        if !(1..=8).contains(&quant_bits) {
            return Err(ReconstructorError::InvalidQuantBits(quant_bits));
        }
        Ok(Self { block, quant_bits })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn quant_bits(&self) -> u32 {
        self.quant_bits
    }

    /// Fraction of spatial elements kept by the block bottleneck, `1 / k^2`.
    pub fn compression_ratio(&self) -> f64 {
        1.0 / (self.block * self.block) as f64
    }

    /// Maps `v` to the nearest of the `2^b` uniform levels `i / (2^b - 1)`.
    pub fn quantize(&self, v: f64) -> f64 {
        let levels = f64::from((1u32 << self.quant_bits) - 1);
        (v * levels).round() / levels
    }
}

impl Default for StandInConfig {
    fn default() -> Self {
        Self { block: 2, quant_bits: 6 }
    }
}

/// Block-average, quantize, upsample. Borders that do not fill a whole block
/// are padded by edge replication before averaging, then cropped away.
pub fn reconstruct(img: &Image, cfg: &StandInConfig) -> Image {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let k = cfg.block;
    let blocks_x = w.div_ceil(k);
    let blocks_y = h.div_ceil(k);
    let mut out = vec![0.0; w * h * ch];
    let area = (k * k) as f64;

    for c in 0..ch {
        for by in 0..blocks_y {
            for bx in 0..blocks_x {
                let mut sum = 0.0;
                for dy in 0..k {
                    let y = (by * k + dy).min(h - 1);
                    for dx in 0..k {
                        let x = (bx * k + dx).min(w - 1);
                        sum += img.get(x, y, c);
                    }
                }
                let level = cfg.quantize(sum / area).clamp(0.0, 1.0);
                for y in (by * k)..((by + 1) * k).min(h) {
                    for x in (bx * k)..((bx + 1) * k).min(w) {
                        out[(y * w + x) * ch + c] = level;
                    }
                }
            }
        }
    }
    Image::new(w, h, ch, out).expect("reconstruction preserves image invariants")
}

/// SplitMix64 increment (golden-ratio constant).
const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step. Returns the advanced state and a uniform real in
/// `[0, 1)` built from the top 53 bits of the output.
pub fn prng_next(state: u64) -> (u64, f64) {
    let state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (state, (z >> 11) as f64 / (1u64 << 53) as f64)
}

/// Stateful wrapper over [`prng_next`].
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_f64(&mut self) -> f64 {
        let (state, v) = prng_next(self.state);
        self.state = state;
        v
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller (cosine branch only).
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Domain shift applied to produce the out-of-domain half of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shift {
    /// Additive Gaussian noise with standard deviation `sigma`, clamped.
    Noise { sigma: f64 },
    /// Constant offset, clamped.
    Brightness { delta: f64 },
    /// `1 - x`.
    Invert,
}

impl Shift {
    fn validate(&self) -> Result<(), ReconstructorError> {
        match *self {
            Shift::Noise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => Err(
                ReconstructorError::InvalidCorpus(format!("noise sigma {sigma} must be finite and >= 0")),
            ),
            Shift::Brightness { delta } if !(-1.0..=1.0).contains(&delta) => Err(
                ReconstructorError::InvalidCorpus(format!("brightness delta {delta} outside [-1, 1]")),
            ),
            _ => Ok(()),
        }
    }

    fn apply(&self, v: f64, rng: &mut SplitMix64) -> f64 {
        match *self {
            Shift::Noise { sigma } => (v + sigma * rng.gaussian()).clamp(0.0, 1.0),
            Shift::Brightness { delta } => (v + delta).clamp(0.0, 1.0),
            Shift::Invert => 1.0 - v,
        }
    }
}

impl std::str::FromStr for Shift {
    type Err = String;

    /// Parses `noise:<sigma>`, `brightness:<delta>` or `invert`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let value = |name: &str| -> Result<f64, String> {
            arg.ok_or_else(|| format!("{name} shift needs a value, e.g. {name}:0.1"))?
                .parse::<f64>()
                .map_err(|e| format!("bad {name} value: {e}"))
        };
        let shift = match kind {
            "noise" => Shift::Noise { sigma: value("noise")? },
            "brightness" => Shift::Brightness {
                delta: value("brightness")?,
            },
            "invert" if arg.is_none() => Shift::Invert,
            _ => return Err(format!("unknown shift {s:?}; expected noise:<sigma>, brightness:<delta> or invert")),
        };
        shift.validate().map_err(|e| e.to_string())?;
        Ok(shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub shift: Shift,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), ReconstructorError> {
        if self.count == 0 {
            return Err(ReconstructorError::InvalidCorpus("count must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ReconstructorError::InvalidCorpus(format!(
                "size {}x{} must be positive",
                self.width, self.height
            )));
        }
        self.shift.validate()
    }
}

pub const IN_DOMAIN: &str = "in";
pub const OUT_OF_DOMAIN: &str = "out";

/// Smooth bilinear-plus-saddle surface with seeded coefficients.
fn smooth_frame(width: usize, height: usize, rng: &mut SplitMix64) -> Image {
    let base = rng.uniform(0.3, 0.7);
    let gx = rng.uniform(-0.4, 0.4);
    let gy = rng.uniform(-0.4, 0.4);
    let saddle = rng.uniform(-0.3, 0.3);
    let span = |n: usize| if n > 1 { (n - 1) as f64 } else { 1.0 };
    let (sx, sy) = (span(width), span(height));
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let v = y as f64 / sy - 0.5;
        for x in 0..width {
            let u = x as f64 / sx - 0.5;
            pixels.push((base + gx * u + gy * v + saddle * u * v).clamp(0.0, 1.0));
        }
    }
    Image::new(width, height, 1, pixels).expect("clamped pixels are valid")
}

/// `count` smooth in-domain frames tagged [`IN_DOMAIN`], followed by their
/// shifted copies tagged [`OUT_OF_DOMAIN`], in index order.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<(Image, &'static str)>, ReconstructorError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let inside: Vec<Image> = (0..spec.count)
        .map(|_| smooth_frame(spec.width, spec.height, &mut rng))
        .collect();
    let outside: Vec<Image> = inside
        .iter()
        .map(|img| {
            let pixels = img.pixels().iter().map(|&v| spec.shift.apply(v, &mut rng)).collect();
            Image::new(img.width(), img.height(), 1, pixels).expect("shifted pixels are valid")
        })
        .collect();
    Ok(inside
        .into_iter()
        .map(|img| (img, IN_DOMAIN))
        .chain(outside.into_iter().map(|img| (img, OUT_OF_DOMAIN)))
        .collect())
}
