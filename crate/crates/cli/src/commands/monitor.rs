use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use oodwatch_core::monitor::{decision_latency, Monitor, MonitorError};
use oodwatch_core::ScoreRecord;

use crate::commands::calibrate::read_doc;
use crate::error::{CliError, Result};
use crate::jsonl::{parse_line, write_line};
use crate::manifest::{beside, RunManifest};
use crate::MonitorArgs;

fn resolve(args: &MonitorArgs, run: &mut RunManifest) -> Result<(usize, Option<f64>)> {
    let (mut tau, mut threshold) = (None, None);
    if let Some(path) = &args.calib {
        run.digest_file(path)?;
        let doc = read_doc(path)?;
        tau = doc.tau_min;
        threshold = doc.threshold;
        if args.tau.is_none() && tau.is_none() {
            return Err(CliError::Usage(format!(
                "{} holds no separating tau; pass --tau",
                path.display()
            )));
        }
    }
    if let Some(t) = args.tau {
        tau = Some(t as usize);
    }
    if args.threshold.is_some() {
        threshold = args.threshold;
    }
    let tau = tau.ok_or_else(|| CliError::Usage("need --calib or --tau".into()))?;
    Ok((tau, threshold))
}

/// Reads records one line at a time and writes each verdict as soon as its
/// window completes.
fn stream<R: BufRead, W: Write>(input: R, origin: &str, out: &mut W, monitor: &mut Monitor, flush: bool) -> Result<(usize, usize)> {
    let (mut frames, mut verdicts) = (0, 0);
    let write_err = |e: io::Error| CliError::Io {
        path: "<output>".into(),
        source: e,
    };
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(CliError::io(origin))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoreRecord = parse_line(&line, origin, i + 1)?;
        frames += 1;
        match monitor.push(&rec) {
            Ok(Some(v)) => {
                write_line(out, &v).and_then(|_| out.flush()).map_err(write_err)?;
                verdicts += 1;
            }
            Ok(None) => {}
            Err(e @ MonitorError::NonMonotonicFrameId { .. }) => {
                return Err(CliError::NonMonotonic(format!("{origin}:{}: {e}", i + 1)))
            }
            Err(e) => return Err(CliError::Input(format!("{origin}:{}: {e}", i + 1))),
        }
    }
    if flush {
        if let Some(v) = monitor.flush() {
            write_line(out, &v).and_then(|_| out.flush()).map_err(write_err)?;
            verdicts += 1;
        }
    }
    Ok((frames, verdicts))
}

pub fn run(args: &MonitorArgs, quiet: bool) -> Result<()> {
    let mut run = RunManifest::new("monitor", args);
    let (tau, threshold) = resolve(args, &mut run)?;
    if !args.cap.is_finite() {
        return Err(CliError::Usage(format!("--cap {} must be finite", args.cap)));
    }
    let mut monitor = Monitor::new(tau, args.mode.into(), threshold)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_cap(args.cap);
    run.note("tau", tau);
    run.note("threshold", threshold);
    if let Some(rate) = args.frame_rate {
        let latency = decision_latency(tau, rate).map_err(|e| CliError::Usage(e.to_string()))?;
        run.note("decision_latency_s", latency);
    }

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(CliError::io(path))?)),
        None => Box::new(io::stdout().lock()),
    };
    let from_stdin = args.input.as_deref().is_none_or(|p| p == Path::new("-"));
    let result = if from_stdin {
        stream(io::stdin().lock(), "<stdin>", &mut out, &mut monitor, args.flush)
    } else {
        let path = args.input.as_deref().expect("checked above");
        let file = File::open(path).map_err(CliError::io(path))?;
        stream(BufReader::new(file), &path.display().to_string(), &mut out, &mut monitor, args.flush)
    };
    let (frames, verdicts) = result?;
    out.flush().map_err(CliError::io("<output>"))?;

    if let Some(path) = args.input.as_deref().filter(|_| !from_stdin) {
        run.digest_file(path)?;
    }
    run.note("frames", frames);
    run.note("verdicts", verdicts);
    run.emit(args.run_manifest.as_deref(), args.out.as_deref().map(beside), quiet)
}
