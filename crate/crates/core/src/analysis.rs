//! PSNR vs. segmentation accuracy (mIoU).
//!
//! Regressions are fitted per domain group. A pooled fit across domains mixes
//! two populations with very different accuracy and says little about either,
//! so callers have to ask for it explicitly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitor::ScoreRecord;
use crate::sequential_mean;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("all PSNR values are equal; slope is undefined")]
    DegenerateX,
    #[error("frame {frame_id} has no miou")]
    MissingMiou { frame_id: u64 },
    #[error("frame {frame_id} has no domain tag")]
    MissingDomain { frame_id: u64 },
    #[error("{len} records do not fill a single window of {tau}")]
    NoFullWindow { len: usize, tau: usize },
    #[error("window length tau must be at least 1")]
    InvalidTau,
    #[error("empty input")]
    EmptyInput,
}

/// Ordinary least-squares line `miou = slope * psnr + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub group: String,
    pub tau: usize,
    #[serde(flatten)]
    pub fit: LinearFit,
}

/// Centered two-pass OLS: `slope = Sxy / Sxx`.
pub fn regress(points: &[(f64, f64)]) -> Result<LinearFit, AnalysisError> {
    let n = points.len();
    if n < 2 {
        return Err(AnalysisError::TooFewPoints(n));
    }
    let mean_x = sequential_mean(points.iter().map(|p| p.0));
    let mean_y = sequential_mean(points.iter().map(|p| p.1));
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(AnalysisError::DegenerateX);
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
        n,
    })
}

/// `(mean psnr, mean miou)` per full tumbling window of `tau` records.
pub fn windowed_pairs(records: &[ScoreRecord], tau: usize) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if tau == 0 {
        return Err(AnalysisError::InvalidTau);
    }
    let pairs = records
        .iter()
        .map(|r| {
            r.miou
                .map(|m| (r.psnr, m))
                .ok_or(AnalysisError::MissingMiou { frame_id: r.frame_id })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if pairs.len() < tau {
        return Err(AnalysisError::NoFullWindow { len: pairs.len(), tau });
    }
    Ok(pairs
        .chunks_exact(tau)
        .map(|w| {
            (
                sequential_mean(w.iter().map(|p| p.0)),
                sequential_mean(w.iter().map(|p| p.1)),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: sequential_mean(values.iter().copied()),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub domain: String,
    pub count: usize,
    pub psnr: Range,
    /// Over the records that carry an mIoU; absent if none do.
    pub miou: Option<Range>,
}

/// Records grouped by domain tag, in record order within each group.
pub fn group_by_domain(records: &[ScoreRecord]) -> Result<BTreeMap<String, Vec<ScoreRecord>>, AnalysisError> {
    let mut groups: BTreeMap<String, Vec<ScoreRecord>> = BTreeMap::new();
    for r in records {
        let domain = r
            .domain
            .as_ref()
            .ok_or(AnalysisError::MissingDomain { frame_id: r.frame_id })?;
        groups.entry(domain.clone()).or_default().push(r.clone());
    }
    Ok(groups)
}

/// Per-domain statistics, sorted by domain tag.
pub fn group_summary(records: &[ScoreRecord]) -> Result<Vec<GroupSummary>, AnalysisError> {
    if records.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    Ok(group_by_domain(records)?
        .into_iter()
        .map(|(domain, recs)| {
            let psnr: Vec<f64> = recs.iter().map(|r| r.psnr).collect();
            let miou: Vec<f64> = recs.iter().filter_map(|r| r.miou).collect();
            GroupSummary {
                domain,
                count: recs.len(),
                psnr: Range::of(&psnr).expect("groups are non-empty"),
                miou: Range::of(&miou),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstructor::SplitMix64;
    use proptest::prelude::*;

    fn rec(id: u64, domain: &str, psnr: f64, miou: f64) -> ScoreRecord {
        ScoreRecord::new(id, psnr).with_domain(domain).with_miou(miou)
    }

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..40).map(|i| 12.0 + 0.25 * f64::from(i)).map(|x| (x, 0.001 * x + 0.3)).collect();
        let fit = regress(&pts).unwrap();
        assert!((fit.slope - 0.001).abs() < 1e-12);
        assert!((fit.intercept - 0.3).abs() < 1e-12);
        assert_eq!(fit.n, 40);
    }

    #[test]
    fn constant_response_has_zero_slope() {
        let fit = regress(&[(10.0, 0.4), (12.0, 0.4), (19.0, 0.4)]).unwrap();
        assert!(fit.slope.abs() < 1e-15);
        assert!((fit.intercept - 0.4).abs() < 1e-15);
        let exact = regress(&[(10.0, 0.5), (12.0, 0.5), (19.0, 0.5), (20.0, 0.5)]).unwrap();
        assert_eq!(exact.slope, 0.0);
    }

    #[test]
    fn closed_form_oracle_on_seeded_points() {
        let mut rng = SplitMix64::new(5);
        let pts: Vec<(f64, f64)> = (0..5).map(|_| (rng.uniform(12.0, 24.0), rng.next_f64())).collect();
        // Closed form in uncentered sums, a different route from the centered fit.
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let fit = regress(&pts).unwrap();
        assert!((fit.slope - slope).abs() < 1e-9);
        assert!((fit.intercept - (sy - slope * sx) / n).abs() < 1e-9);
    }

    #[test]
    fn regression_errors() {
        assert_eq!(regress(&[(1.0, 1.0)]), Err(AnalysisError::TooFewPoints(1)));
        assert_eq!(regress(&[(3.0, 0.1), (3.0, 0.9)]), Err(AnalysisError::DegenerateX));
    }

    #[test]
    fn windowed_pairs_examples() {
        let recs = vec![rec(0, "in", 10.0, 0.2), rec(1, "in", 20.0, 0.4)];
        assert_eq!(windowed_pairs(&recs, 1).unwrap(), vec![(10.0, 0.2), (20.0, 0.4)]);
        let pairs = windowed_pairs(&recs, 2).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].0, 15.0);
        assert!((pairs[0].1 - 0.3).abs() < 1e-15);
        let three = vec![rec(0, "in", 10.0, 0.2), rec(1, "in", 20.0, 0.4), rec(2, "in", 30.0, 0.6)];
        assert_eq!(windowed_pairs(&three, 2).unwrap().len(), 1);
        assert_eq!(
            windowed_pairs(&recs, 3),
            Err(AnalysisError::NoFullWindow { len: 2, tau: 3 })
        );
        let missing = vec![ScoreRecord::new(4, 10.0)];
        assert_eq!(windowed_pairs(&missing, 1), Err(AnalysisError::MissingMiou { frame_id: 4 }));
    }

    #[test]
    fn summaries() {
        let one = group_summary(&[rec(0, "in", 19.0, 0.7)]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].psnr, Range { mean: 19.0, min: 19.0, max: 19.0 });
        assert_eq!(one[0].miou, Some(Range { mean: 0.7, min: 0.7, max: 0.7 }));

        let two = group_summary(&[rec(0, "out", 15.0, 0.2), rec(1, "in", 20.0, 0.6), rec(2, "out", 17.0, 0.4)]).unwrap();
        assert_eq!(two.iter().map(|g| g.domain.as_str()).collect::<Vec<_>>(), vec!["in", "out"]);
        assert_eq!(two[1].count, 2);
        assert_eq!(two[1].psnr.mean, 16.0);

        assert_eq!(group_summary(&[]), Err(AnalysisError::EmptyInput));
        assert_eq!(
            group_summary(&[ScoreRecord::new(9, 1.0)]),
            Err(AnalysisError::MissingDomain { frame_id: 9 })
        );
    }

    #[test]
    fn window_averaging_pulls_slope_toward_truth() {
        // Noise on x attenuates the fitted slope; averaging over windows of a
        // slowly drifting signal shrinks that noise relative to the spread.
        let mut rng = SplitMix64::new(23);
        let true_slope = 0.02;
        let recs: Vec<ScoreRecord> = (0..4000)
            .map(|i| {
                let latent = 18.0 + 4.0 * ((i / 200) % 2) as f64 + (i % 200) as f64 * 0.01;
                let x = latent + 2.0 * rng.gaussian();
                let y = true_slope * latent + 0.3 + 0.01 * rng.gaussian();
                ScoreRecord::new(i as u64, x).with_miou(y)
            })
            .collect();
        let s1 = regress(&windowed_pairs(&recs, 1).unwrap()).unwrap().slope;
        let s50 = regress(&windowed_pairs(&recs, 50).unwrap()).unwrap().slope;
        assert!((s50 - true_slope).abs() < (s1 - true_slope).abs(), "{s1} {s50}");
    }

    proptest! {
        #[test]
        fn shift_in_x_keeps_slope(pts in (1u32..6).prop_flat_map(|k| prop::collection::vec((0i32..400, 0i32..1000), 1usize << k)),
                                  shift in -20i32..20) {
            // Grid values and power-of-two counts keep every sum and mean exact.
            let pts: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (f64::from(x) / 8.0, f64::from(y) / 1024.0)).collect();
            prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
            let shifted: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + f64::from(shift), y)).collect();
            prop_assert_eq!(regress(&pts).unwrap().slope, regress(&shifted).unwrap().slope);
        }

        #[test]
        fn two_points_define_the_line(x1 in -50.0f64..50.0, dx in 0.1f64..30.0, y1 in 0.0f64..1.0, y2 in 0.0f64..1.0) {
            let x2 = x1 + dx;
            let fit = regress(&[(x1, y1), (x2, y2)]).unwrap();
            prop_assert!((fit.predict(x1) - y1).abs() < 1e-9);
            prop_assert!((fit.predict(x2) - y2).abs() < 1e-9);
        }

        #[test]
        fn unit_window_is_identity(vals in prop::collection::vec((0.0f64..60.0, 0.0f64..1.0), 1..50)) {
            let recs: Vec<ScoreRecord> = vals.iter().enumerate().map(|(i, &(p, m))| ScoreRecord::new(i as u64, p).with_miou(m)).collect();
            prop_assert_eq!(windowed_pairs(&recs, 1).unwrap(), vals);
        }
    }
}
