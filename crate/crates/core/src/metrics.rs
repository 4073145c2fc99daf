//! Reconstruction and segmentation metrics.
//!
//! Intensities are normalized to `[0, 1]`, so the PSNR peak is fixed at 1.0
//! and `psnr = 10 * log10(1 / mse)`. MSE is the mean over every element
//! (all pixels, all channels) summed in index order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image_io::{Image, LabelMap};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },
    #[error("images are identical; PSNR is infinite")]
    IdenticalImages,
    #[error("label {label} at pixel {index} is not below num_classes={num_classes}")]
    LabelOutOfRange {
        label: u8,
        index: usize,
        num_classes: usize,
    },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("invalid loss weights alpha={alpha} beta={beta}")]
    InvalidWeights { alpha: f64, beta: f64 },
}

fn describe(img: &Image) -> String {
    format!("{}x{}x{}", img.width(), img.height(), img.channels())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::ShapeMismatch {
            left: describe(a),
            right: describe(b),
        });
    }
    let mut sum = 0.0;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        let d = x - y;
        sum += d * d;
    }
    Ok(sum / a.pixels().len() as f64)
}

/// PSNR in decibels from a precomputed MSE.
pub fn psnr_from_mse(mse: f64) -> Result<f64, MetricsError> {
    if mse == 0.0 {
        return Err(MetricsError::IdenticalImages);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    psnr_from_mse(mse(a, b)?)
}

/// Weights of the reconstruction training loss `kld * alpha + mse * beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    alpha: f64,
    beta: f64,
}

impl LossWeights {
    /// The weights used for the reference decoder: alpha = 0.1, beta = 1.
    pub const REFERENCE: LossWeights = LossWeights { alpha: 0.1, beta: 1.0 };

    pub fn new(alpha: f64, beta: f64) -> Result<Self, MetricsError> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta > 0.0) || !(alpha + beta).is_finite() {
            return Err(MetricsError::InvalidWeights { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// The KLD term is taken as an opaque non-negative input.
pub fn combined_loss(kld: f64, mse: f64, w: LossWeights) -> f64 {
    kld * w.alpha + mse * w.beta
}

/// `counts[g * num_classes + p]` = pixels with ground truth `g` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds another matrix of the same size, e.g. to fold per-image matrices
    /// into a dataset-global one.
    pub fn accumulate(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.num_classes, other.num_classes, "class count mismatch");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// IoU of class `c`, or `None` when the class is absent from both maps.
    pub fn class_iou(&self, c: usize) -> Option<f64> {
        let tp = self.get(c, c);
        let row: u64 = (0..self.num_classes).map(|p| self.get(c, p)).sum();
        let col: u64 = (0..self.num_classes).map(|g| self.get(g, c)).sum();
        let union = row + col - tp;
        (union > 0).then(|| tp as f64 / union as f64)
    }
}

pub fn confusion(gt: &LabelMap, pred: &LabelMap, num_classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if gt.width() != pred.width() || gt.height() != pred.height() {
        return Err(MetricsError::ShapeMismatch {
            left: format!("{}x{}", gt.width(), gt.height()),
            right: format!("{}x{}", pred.width(), pred.height()),
        });
    }
    let mut cm = ConfusionMatrix::new(num_classes);
    for (index, (&g, &p)) in gt.labels().iter().zip(pred.labels()).enumerate() {
        for label in [g, p] {
            if usize::from(label) >= num_classes {
                return Err(MetricsError::LabelOutOfRange {
                    label,
                    index,
                    num_classes,
                });
            }
        }
        cm.counts[usize::from(g) * num_classes + usize::from(p)] += 1;
    }
    Ok(cm)
}

/// Mean IoU over classes present in either map. Classes with an empty union
/// are excluded rather than counted as 0 or 1.
pub fn miou(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for iou in (0..cm.num_classes).filter_map(|c| cm.class_iou(c)) {
        sum += iou;
        present += 1;
    }
    Ok(sum / present as f64)
}

/// Short name of the class-handling convention, recorded in run metadata.
pub const MIOU_CONVENTION: &str = "per-image; classes with empty union excluded";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(pixels: &[f64]) -> Image {
        Image::new(pixels.len(), 1, 1, pixels.to_vec()).unwrap()
    }

    fn labels(w: usize, h: usize, l: &[u8]) -> LabelMap {
        LabelMap::new(w, h, l.to_vec()).unwrap()
    }

    #[test]
    fn mse_basics() {
        let zeros = gray(&[0.0; 4]);
        let ones = gray(&[1.0; 4]);
        assert_eq!(mse(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(mse(&zeros, &ones).unwrap(), 1.0);
        assert_eq!(mse(&gray(&[0.5]), &gray(&[0.25])).unwrap(), 0.0625);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let a = gray(&[0.0; 4]);
        let b = Image::new(2, 2, 1, vec![0.0; 4]).unwrap();
        assert!(matches!(mse(&a, &b), Err(MetricsError::ShapeMismatch { .. })));
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr(&gray(&[0.0; 3]), &gray(&[1.0; 3])).unwrap(), 0.0);
        let p = psnr(&gray(&[0.2, 0.5, 0.9]), &gray(&[0.3, 0.4, 0.8])).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
        assert_eq!(psnr(&gray(&[0.3]), &gray(&[0.3])), Err(MetricsError::IdenticalImages));
    }

    #[test]
    fn combined_loss_reference_weights() {
        let w = LossWeights::REFERENCE;
        assert!((combined_loss(2.0, 0.5, w) - 0.7).abs() < 1e-12);
        assert_eq!(combined_loss(0.0, 0.0, w), 0.0);
        assert!((combined_loss(1.0, 0.0, w) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn loss_weight_validation() {
        assert!(LossWeights::new(0.0, 0.0).is_err());
        assert!(LossWeights::new(-0.1, 1.0).is_err());
        assert!(LossWeights::new(f64::NAN, 1.0).is_err());
        assert!(LossWeights::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn confusion_counts() {
        let cm = confusion(&labels(2, 2, &[0; 4]), &labels(2, 2, &[0; 4]), 2).unwrap();
        assert_eq!(cm.get(0, 0), 4);
        assert_eq!(cm.total(), 4);
        let cm = confusion(&labels(2, 1, &[0, 1]), &labels(2, 1, &[1, 0]), 2).unwrap();
        assert_eq!((cm.get(0, 1), cm.get(1, 0), cm.get(0, 0), cm.get(1, 1)), (1, 1, 0, 0));
    }

    #[test]
    fn confusion_label_out_of_range() {
        let err = confusion(&labels(1, 1, &[7]), &labels(1, 1, &[0]), 4).unwrap_err();
        assert_eq!(
            err,
            MetricsError::LabelOutOfRange {
                label: 7,
                index: 0,
                num_classes: 4
            }
        );
        let gt = labels(2, 1, &[0, 0]);
        assert!(matches!(
            confusion(&gt, &labels(1, 2, &[0, 0]), 4),
            Err(MetricsError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn miou_examples() {
        let gt = labels(2, 2, &[0, 0, 1, 1]);
        assert_eq!(miou(&confusion(&gt, &gt, 3).unwrap()).unwrap(), 1.0);
        let pred = labels(2, 2, &[0, 1, 1, 1]);
        let m = miou(&confusion(&gt, &pred, 2).unwrap()).unwrap();
        assert!((m - 7.0 / 12.0).abs() < 1e-12);
        let m = miou(&confusion(&labels(2, 1, &[0, 0]), &labels(2, 1, &[1, 1]), 2).unwrap()).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(miou(&ConfusionMatrix::new(3)), Err(MetricsError::EmptyMatrix));
    }

    fn image_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..32).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.0f64..=1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn psnr_is_symmetric((a, b) in image_pair()) {
            let (a, b) = (gray(&a), gray(&b));
            prop_assert_eq!(psnr(&a, &b).ok(), psnr(&b, &a).ok());
        }

        #[test]
        fn psnr_decreases_when_difference_grows(base in prop::collection::vec(0.25f64..=0.75, 1..16),
                                                diff in prop::collection::vec(-0.1f64..0.1, 16),
                                                scale in 1.05f64..2.5) {
            let n = base.len();
            let d: Vec<f64> = diff[..n].to_vec();
            prop_assume!(d.iter().any(|v| v.abs() > 1e-6));
            let a = gray(&base);
            let near = gray(&base.iter().zip(&d).map(|(x, e)| x + e).collect::<Vec<_>>());
            let far = gray(&base.iter().zip(&d).map(|(x, e)| x + e * scale).collect::<Vec<_>>());
            prop_assert!(psnr(&a, &far).unwrap() < psnr(&a, &near).unwrap());
        }

        #[test]
        fn combined_loss_is_linear(k1 in 0.0f64..10.0, k2 in 0.0f64..10.0, m in 0.0f64..1.0) {
            let w = LossWeights::REFERENCE;
            let lhs = combined_loss(k1 + k2, m, w);
            let rhs = combined_loss(k1, m, w) + combined_loss(k2, 0.0, w);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn miou_in_unit_interval(gt in prop::collection::vec(0u8..5, 16), pred in prop::collection::vec(0u8..5, 16)) {
            let m = miou(&confusion(&labels(4, 4, &gt), &labels(4, 4, &pred), 5).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }
}
