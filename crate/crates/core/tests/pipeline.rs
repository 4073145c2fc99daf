use oodwatch_core::analysis::group_summary;
use oodwatch_core::image_io::{load_image, write_image, Image, LabelMap};
use oodwatch_core::metrics::{confusion, miou, psnr};
use oodwatch_core::reconstructor::{generate_corpus, reconstruct, CorpusSpec, Shift, SplitMix64, StandInConfig};
use oodwatch_core::ScoreRecord;
use proptest::prelude::*;

/// Per-pixel IoU without a confusion matrix.
fn brute_miou(gt: &[u8], pred: &[u8], classes: u8) -> Option<f64> {
    let mut ious = Vec::new();
    for c in 0..classes {
        let inter = gt.iter().zip(pred).filter(|(g, p)| **g == c && **p == c).count();
        let union = gt.iter().zip(pred).filter(|(g, p)| **g == c || **p == c).count();
        if union > 0 {
            ious.push(inter as f64 / union as f64);
        }
    }
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

fn random_image(w: usize, h: usize, ch: usize, seed: u64, on_grid: bool) -> Image {
    let mut rng = SplitMix64::new(seed);
    let pixels = (0..w * h * ch)
        .map(|_| {
            let v = rng.next_f64();
            if on_grid {
                (v * 255.0).floor() / 255.0
            } else {
                v
            }
        })
        .collect();
    Image::new(w, h, ch, pixels).unwrap()
}

proptest! {
    #[test]
    fn write_then_load_is_within_half_step(w in 1usize..16, h in 1usize..16, rgb in any::<bool>(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(w, h, if rgb { 3 } else { 1 }, seed, false);
        let path = dir.path().join("x.pnm");
        write_image(&img, &path).unwrap();
        let back = load_image(&path).unwrap();
        prop_assert!(back.same_shape(&img));
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-15);
            prop_assert!((0.0..=1.0).contains(b));
        }
    }

    #[test]
    fn grid_images_round_trip_exactly(w in 1usize..16, h in 1usize..16, rgb in any::<bool>(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let img = random_image(w, h, if rgb { 3 } else { 1 }, seed, true);
        let path = dir.path().join("x.pnm");
        write_image(&img, &path).unwrap();
        prop_assert_eq!(load_image(&path).unwrap(), img);
    }

    #[test]
    fn miou_matches_pixel_count(w in 1usize..=8, h in 1usize..=8, classes in 1u8..6, seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let mut draw = || (0..w * h).map(|_| (rng.next_f64() * f64::from(classes)) as u8).collect::<Vec<u8>>();
        let (gt, pred) = (draw(), draw());
        let cm = confusion(&LabelMap::new(w, h, gt.clone()).unwrap(), &LabelMap::new(w, h, pred.clone()).unwrap(), classes as usize).unwrap();
        let expected = brute_miou(&gt, &pred, classes).unwrap();
        prop_assert!((miou(&cm).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn corpus_through_stand_in_separates_domains() {
    let corpus = generate_corpus(&CorpusSpec {
        count: 64,
        width: 32,
        height: 32,
        shift: Shift::Noise { sigma: 0.15 },
        seed: 7,
    })
    .unwrap();
    let cfg = StandInConfig::default();
    let records: Vec<ScoreRecord> = corpus
        .iter()
        .enumerate()
        .map(|(i, (img, tag))| ScoreRecord::new(i as u64, psnr(img, &reconstruct(img, &cfg)).unwrap_or(100.0)).with_domain(*tag))
        .collect();
    let summary = group_summary(&records).unwrap();
    assert_eq!(summary.len(), 2);
    let (inside, outside) = (&summary[0], &summary[1]);
    assert_eq!((inside.domain.as_str(), outside.domain.as_str()), ("in", "out"));
    assert!(inside.psnr.mean > outside.psnr.mean);
    assert!(inside.psnr.min > outside.psnr.max, "single frames already separate at this noise level");
}

#[test]
fn noise_shift_lowers_mean_psnr_across_sigmas() {
    for shift in [Shift::Noise { sigma: 0.05 }, Shift::Noise { sigma: 0.3 }] {
        let corpus = generate_corpus(&CorpusSpec {
            count: 64,
            width: 16,
            height: 16,
            shift,
            seed: 1,
        })
        .unwrap();
        let cfg = StandInConfig::new(2, 6).unwrap();
        let mean = |tag: &str| {
            let v: Vec<f64> = corpus
                .iter()
                .filter(|(_, t)| *t == tag)
                .map(|(img, _)| psnr(img, &reconstruct(img, &cfg)).unwrap_or(100.0))
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean("in") > mean("out"), "{shift:?}");
    }
}
