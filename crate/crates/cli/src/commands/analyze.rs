use std::fs;

use oodwatch_core::analysis::{group_by_domain, group_summary, regress, windowed_pairs, AnalysisError, GroupSummary, LinearFit};
use oodwatch_core::metrics::MIOU_CONVENTION;
use oodwatch_core::{RegressionResult, ScoreRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::jsonl::read_scores;
use crate::manifest::RunManifest;
use crate::AnalyzeArgs;

pub const POOLED_CAVEAT: &str = "pooled across domains; PSNR does not predict mIoU without first separating in- and out-of-domain data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub group: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    #[serde(flatten)]
    pub fit: LinearFit,
    pub caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDoc {
    pub tau: usize,
    pub regressions: Vec<RegressionResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Skipped>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled: Option<PooledFit>,
    pub summaries: Vec<GroupSummary>,
    pub miou_convention: String,
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::MissingMiou { .. } => CliError::MissingMiou(e.to_string()),
        other => CliError::Input(other.to_string()),
    }
}

pub fn run(args: &AnalyzeArgs, quiet: bool) -> Result<()> {
    let mut run = RunManifest::new("analyze", args);
    let mut records: Vec<ScoreRecord> = Vec::new();
    for path in &args.scores {
        run.digest_file(path)?;
        records.extend(read_scores(path)?);
    }
    if let Some(r) = records.iter().find(|r| r.miou.is_none()) {
        return Err(CliError::MissingMiou(format!(
            "frame {} has no miou; score with --gt-dir/--pred-dir/--classes",
            r.frame_id
        )));
    }
    let tau = args.tau as usize;
    let summaries = group_summary(&records).map_err(analysis_error)?;

    let mut doc = AnalysisDoc {
        tau,
        regressions: Vec::new(),
        skipped: Vec::new(),
        pooled: None,
        summaries,
        miou_convention: MIOU_CONVENTION.to_string(),
    };
    let mut scatter = String::from("psnr,miou,domain\n");
    let mut all_pairs = Vec::new();
    for (group, recs) in group_by_domain(&records).map_err(analysis_error)? {
        let pairs = match windowed_pairs(&recs, tau) {
            Ok(p) => p,
            Err(e @ AnalysisError::NoFullWindow { .. }) => {
                doc.skipped.push(Skipped { group, reason: e.to_string() });
                continue;
            }
            Err(e) => return Err(analysis_error(e)),
        };
        for (x, y) in &pairs {
            scatter.push_str(&format!("{x},{y},{group}\n"));
        }
        match regress(&pairs) {
            Ok(fit) => doc.regressions.push(RegressionResult {
                group: group.clone(),
                tau,
                fit,
            }),
            Err(e) => doc.skipped.push(Skipped {
                group: group.clone(),
                reason: e.to_string(),
            }),
        }
        all_pairs.extend(pairs);
    }
    if args.pooled {
        match regress(&all_pairs) {
            Ok(fit) => {
                doc.pooled = Some(PooledFit {
                    fit,
                    caveat: POOLED_CAVEAT.to_string(),
                })
            }
            Err(e) => doc.skipped.push(Skipped {
                group: "pooled".into(),
                reason: e.to_string(),
            }),
        }
    }

    fs::create_dir_all(&args.out).map_err(CliError::io(&args.out))?;
    let json_path = args.out.join("regression.json");
    let json = serde_json::to_string_pretty(&doc).expect("analysis serializes") + "\n";
    fs::write(&json_path, json).map_err(CliError::io(&json_path))?;
    let csv_path = args.out.join("scatter.csv");
    fs::write(&csv_path, scatter).map_err(CliError::io(&csv_path))?;
    run.write(&args.out.join("run_manifest.json"))?;
    if !quiet {
        for r in &doc.regressions {
            eprintln!("{}: slope {:.6} mIoU/dB over {} points", r.group, r.fit.slope, r.fit.n);
        }
    }
    Ok(())
}
