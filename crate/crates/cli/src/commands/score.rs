use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use oodwatch_core::image_io::{load_image, load_label_map, Image, ImageError};
use oodwatch_core::metrics::{confusion, miou, mse, psnr_from_mse, MetricsError, MIOU_CONVENTION};
use oodwatch_core::reconstructor::reconstruct;
use oodwatch_core::ScoreRecord;

use crate::error::{CliError, Result};
use crate::jsonl::{read_all, write_line, CorpusEntry};
use crate::manifest::{beside, RunManifest};
use crate::ScoreArgs;

fn image_error(e: ImageError) -> CliError {
    match e {
        ImageError::Io { path, source } => CliError::Io { path, source },
        other => CliError::Input(other.to_string()),
    }
}

/// Loads a file paired with `frame`; a missing file is a pairing failure.
fn paired<T>(dir: &Path, name: &str, frame: usize, what: &str, load: fn(PathBuf) -> Result<T, ImageError>) -> Result<T> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CliError::Frame(format!(
            "frame {frame} ({name}): missing {what} {}",
            path.display()
        )));
    }
    load(path).map_err(image_error)
}

fn score_frame(args: &ScoreArgs, base: &Path, frame: usize, entry: &CorpusEntry, run: &mut RunManifest, channels: &mut BTreeSet<usize>) -> Result<ScoreRecord> {
    let input_path = base.join(&entry.path);
    let input = load_image(&input_path).map_err(image_error)?;
    run.digest_file(&input_path)?;
    channels.insert(input.channels());

    let name = Path::new(&entry.path)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(&entry.path)
        .to_string();
    let recon: Image = match (&args.standin, &args.recon_dir) {
        (Some(cfg), _) => reconstruct(&input, cfg),
        (None, Some(dir)) => {
            let img = paired(dir, &name, frame, "reconstruction", load_image)?;
            run.digest_file(&dir.join(&name))?;
            img
        }
        (None, None) => unreachable!("clap requires a reconstruction source"),
    };
    let err = mse(&input, &recon).map_err(|e| CliError::Frame(format!("frame {frame} ({name}): {e}")))?;
    let mut rec = ScoreRecord::new(frame as u64, 0.0).with_domain(entry.domain.clone());
    match psnr_from_mse(err) {
        Ok(p) => rec.psnr = p,
        Err(MetricsError::IdenticalImages) => {
            rec.psnr = args.cap;
            rec.capped = true;
        }
        Err(e) => return Err(CliError::Frame(format!("frame {frame} ({name}): {e}"))),
    }

    if let (Some(gt_dir), Some(pred_dir), Some(classes)) = (&args.gt_dir, &args.pred_dir, args.classes) {
        let gt = paired(gt_dir, &name, frame, "ground truth", load_label_map)?;
        let pred = paired(pred_dir, &name, frame, "prediction", load_label_map)?;
        run.digest_file(&gt_dir.join(&name))?;
        run.digest_file(&pred_dir.join(&name))?;
        let cm = confusion(&gt, &pred, classes as usize)
            .map_err(|e| CliError::Frame(format!("frame {frame} ({name}): {e}")))?;
        let m = miou(&cm).map_err(|e| CliError::Frame(format!("frame {frame} ({name}): {e}")))?;
        rec.miou = Some(m);
    }
    Ok(rec)
}

pub fn run(args: &ScoreArgs, quiet: bool) -> Result<()> {
    if !(args.cap.is_finite()) {
        return Err(CliError::Usage(format!("--cap {} must be finite", args.cap)));
    }
    let entries: Vec<CorpusEntry> = read_all(&args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("")).to_path_buf();

    let mut run = RunManifest::new("score", args);
    run.digest_file(&args.manifest)?;
    let mut channels = BTreeSet::new();

    let records = entries
        .iter()
        .enumerate()
        .map(|(frame, entry)| score_frame(args, &base, frame, entry, &mut run, &mut channels))
        .collect::<Result<Vec<_>>>()?;

    let mut buf = Vec::new();
    for rec in &records {
        write_line(&mut buf, rec).expect("writing to memory");
    }
    match &args.out {
        Some(path) => fs::write(path, &buf).map_err(CliError::io(path))?,
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            w.write_all(&buf).and_then(|_| w.flush()).map_err(CliError::io("<stdout>"))?;
        }
    }

    run.note("frames", records.len());
    run.note("capped_frames", records.iter().filter(|r| r.capped).count());
    run.note("channels", &channels);
    if args.gt_dir.is_some() {
        run.note("miou_convention", MIOU_CONVENTION);
    }
    run.emit(args.run_manifest.as_deref(), args.out.as_deref().map(beside), quiet)?;
    if !quiet {
        eprintln!("scored {} frames", records.len());
    }
    Ok(())
}
