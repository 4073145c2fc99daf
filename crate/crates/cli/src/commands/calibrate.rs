use std::fs;
use std::path::Path;

use oodwatch_core::calibration::{
    build_histogram, default_range, find_min_tau, windowed_means, CalibrationError, MarginPoint,
};
use oodwatch_core::ScoreRecord;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::jsonl::read_scores;
use crate::manifest::RunManifest;
use crate::CalibrateArgs;

pub const CALIBRATION_NAME: &str = "calibration.json";

/// How the score streams were cut into windows.
pub const SEGMENTATION: &str =
    "each input is one contiguous stream in file order; windows never span inputs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramInfo {
    pub label: String,
    pub tau: usize,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    pub windows: usize,
    pub file: String,
}

/// The calibration document consumed by `monitor --calib`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDoc {
    pub tau_min: Option<usize>,
    pub threshold: Option<f64>,
    pub margin: Option<f64>,
    pub tau_max: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub margin_curve: Vec<MarginPoint>,
    pub histograms: Vec<HistogramInfo>,
    pub window_segmentation: String,
}

fn calibration_error(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::InvalidBins | CalibrationError::InvalidTau | CalibrationError::InvalidRange { .. } => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

fn load_sets(args: &CalibrateArgs, run: &mut RunManifest) -> Result<(Vec<f64>, Vec<f64>)> {
    let psnr = |recs: &[ScoreRecord]| recs.iter().map(|r| r.psnr).collect::<Vec<_>>();
    if let Some(path) = &args.scores {
        run.digest_file(path)?;
        let recs = read_scores(path)?;
        let tagged = |tag: &str| {
            recs.iter()
                .filter(|r| r.domain.as_deref() == Some(tag))
                .map(|r| r.psnr)
                .collect::<Vec<_>>()
        };
        return Ok((tagged(&args.in_tag), tagged(&args.out_tag)));
    }
    let (Some(inp), Some(out)) = (&args.in_scores, &args.out_domain) else {
        return Err(CliError::Usage("need --in and --out-domain, or --scores".into()));
    };
    run.digest_file(inp)?;
    run.digest_file(out)?;
    Ok((psnr(&read_scores(inp)?), psnr(&read_scores(out)?)))
}

fn write_histograms(args: &CalibrateArgs, sets: [(&str, &[f64]); 2], taus: &[usize]) -> Result<Vec<HistogramInfo>> {
    let mut infos = Vec::new();
    for &tau in taus {
        let means: Vec<(&str, Vec<f64>)> = match sets
            .iter()
            .map(|(label, s)| windowed_means(s, tau).map(|m| (*label, m)))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(m) => m,
            Err(CalibrationError::NoFullWindow { .. }) => {
                eprintln!("oodwatch: skipping histogram at tau={tau}: not enough scores for one window");
                continue;
            }
            Err(e) => return Err(calibration_error(e)),
        };
        let (lo, hi) = match (args.lo, args.hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => default_range(means.iter().map(|(_, m)| m.as_slice())).expect("windows are non-empty"),
        };
        for (label, m) in &means {
            let hist = build_histogram(m, args.bins as usize, lo, hi)
                .map_err(calibration_error)?
                .with_label(*label);
            let file = format!("hist_{label}_tau{tau}.csv");
            let path = args.out.join(&file);
            fs::write(&path, hist.to_csv()).map_err(CliError::io(&path))?;
            infos.push(HistogramInfo {
                label: label.to_string(),
                tau,
                lo,
                hi,
                bins: hist.bin_count(),
                windows: m.len(),
                file,
            });
        }
    }
    Ok(infos)
}

pub fn run(args: &CalibrateArgs, quiet: bool) -> Result<()> {
    let mut run = RunManifest::new("calibrate", args);
    let (inside, outside) = load_sets(args, &mut run)?;
    if inside.is_empty() || outside.is_empty() {
        return Err(CliError::Input(format!(
            "need scores for both domains (in: {}, out: {})",
            inside.len(),
            outside.len()
        )));
    }
    let tau_max = args.tau_max as usize;
    let result = find_min_tau(&inside, &outside, tau_max).map_err(calibration_error)?;

    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let mut taus: Vec<usize> = if args.hist_tau.is_empty() {
        std::iter::once(1).chain(result.tau_min).collect()
    } else {
        args.hist_tau.iter().map(|&t| t as usize).collect()
    };
    taus.dedup();
    let histograms = write_histograms(args, [("in", &inside), ("out", &outside)], &taus)?;

    let doc = CalibrationDoc {
        tau_min: result.tau_min,
        threshold: result.threshold,
        margin: result.margin,
        tau_max,
        n_in: inside.len(),
        n_out: outside.len(),
        margin_curve: result.margin_curve,
        histograms,
        window_segmentation: SEGMENTATION.to_string(),
    };
    write_doc(&args.out.join(CALIBRATION_NAME), &doc)?;
    run.write(&args.out.join("run_manifest.json"))?;

    match doc.tau_min {
        Some(tau) => {
            if !quiet {
                eprintln!(
                    "separated at tau={tau}: threshold {:.4} dB, margin {:.4} dB",
                    doc.threshold.unwrap_or_default(),
                    doc.margin.unwrap_or_default()
                );
            }
            Ok(())
        }
        None => Err(CliError::NoSeparation { tau_max }),
    }
}

fn write_doc(path: &Path, doc: &CalibrationDoc) -> Result<()> {
    let json = serde_json::to_string_pretty(doc).expect("calibration serializes") + "\n";
    fs::write(path, json).map_err(CliError::io(path))
}

pub fn read_doc(path: &Path) -> Result<CalibrationDoc> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}
