//! `oodwatch` command-line pipeline: corpus -> score -> calibrate -> monitor,
//! plus the PSNR/mIoU analysis.
//!
//! Exit codes are stable: 0 success, 2 bad arguments, 3 I/O or malformed
//! input, 4 frame pairing or shape failure, 5 no separation, 6 non-monotonic
//! frame ids, 7 missing mIoU.

pub mod commands;
pub mod error;
pub mod jsonl;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use oodwatch_core::monitor::{WindowMode, DEFAULT_PSNR_CAP};
use oodwatch_core::reconstructor::{Shift, StandInConfig};
use serde::Serialize;

pub use error::{CliError, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "oodwatch", version, about = "Reconstruction-error out-of-domain monitoring")]
pub struct Cli {
    /// Suppress progress and summary output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic in/out-of-domain image corpus.
    Corpus(CorpusArgs),
    /// Score frames by reconstruction PSNR (and optionally mIoU).
    Score(ScoreArgs),
    /// Find the minimal window length that separates the domains.
    Calibrate(CalibrateArgs),
    /// Stream windowed verdicts over a score stream.
    Monitor(MonitorArgs),
    /// Regress mIoU on PSNR per domain group.
    Analyze(AnalyzeArgs),
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size {s:?} must look like WIDTHxHEIGHT"))?;
    let dim = |v: &str| match v.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("bad dimension {v:?} in size {s:?}")),
    };
    Ok((dim(w)?, dim(h)?))
}

fn parse_standin(s: &str) -> Result<StandInConfig, String> {
    let (k, b) = s
        .split_once(',')
        .ok_or_else(|| format!("stand-in {s:?} must look like BLOCK,BITS"))?;
    let k = k.trim().parse::<usize>().map_err(|e| format!("bad block size: {e}"))?;
    let b = b.trim().parse::<u32>().map_err(|e| format!("bad bit depth: {e}"))?;
    StandInConfig::new(k, b).map_err(|e| e.to_string())
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("{s:?} must be a positive number")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CorpusArgs {
    /// Images per domain.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Frame size as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size, default_value = "64x64")]
    pub size: (usize, usize),
    /// noise:<sigma>, brightness:<delta> or invert.
    #[arg(long, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<Shift>()))]
    pub shift: Shift,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["standin", "recon_dir"]))]
pub struct ScoreArgs {
    /// Corpus manifest (JSON lines of {"path", "domain"}).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Reconstruct with the block-average stand-in, as BLOCK,BITS.
    #[arg(long, value_parser = parse_standin)]
    pub standin: Option<StandInConfig>,
    /// Directory of externally produced reconstructions, same file names.
    #[arg(long)]
    pub recon_dir: Option<PathBuf>,
    /// Ground-truth label maps, same file names.
    #[arg(long, requires_all = ["pred_dir", "classes"])]
    pub gt_dir: Option<PathBuf>,
    /// Predicted label maps, same file names.
    #[arg(long, requires_all = ["gt_dir", "classes"])]
    pub pred_dir: Option<PathBuf>,
    /// Number of segmentation classes.
    #[arg(long, requires_all = ["gt_dir", "pred_dir"], value_parser = clap::value_parser!(u64).range(1..=256))]
    pub classes: Option<u64>,
    /// PSNR recorded for exact reconstructions.
    #[arg(long, default_value_t = DEFAULT_PSNR_CAP)]
    pub cap: f64,
    /// Score records output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the run manifest.
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("inputs").required(true).args(["in_scores", "scores"]))]
pub struct CalibrateArgs {
    /// In-domain score records.
    #[arg(long = "in", requires = "out_domain")]
    pub in_scores: Option<PathBuf>,
    /// Out-of-domain score records.
    #[arg(long, requires = "in_scores")]
    pub out_domain: Option<PathBuf>,
    /// A single score file split by domain tag instead of --in/--out-domain.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, default_value = "in", requires = "scores")]
    pub in_tag: String,
    #[arg(long, default_value = "out", requires = "scores")]
    pub out_tag: String,
    /// Largest window length to scan.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub tau_max: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Window lengths to write histograms for (default: 1 and tau_min).
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pub hist_tau: Vec<u64>,
    /// Histogram range lower bound (default: floor of the smallest mean).
    #[arg(long, requires = "hi")]
    pub lo: Option<f64>,
    /// Histogram range upper bound (default: ceil of the largest mean).
    #[arg(long, requires = "lo")]
    pub hi: Option<f64>,
    /// Output directory for calibration.json and histogram CSVs.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Tumbling,
    Sliding,
}

impl From<ModeArg> for WindowMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Tumbling => WindowMode::Tumbling,
            ModeArg::Sliding => WindowMode::Sliding,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorArgs {
    /// calibration.json from `calibrate` (supplies tau and threshold).
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Decision threshold in dB (overrides the calibration).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Window length (overrides the calibration).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub tau: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Tumbling)]
    pub mode: ModeArg,
    /// Score stream (default or "-": stdin).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Emit a partial verdict for a trailing short window.
    #[arg(long)]
    pub flush: bool,
    /// Frame rate in Hz; records the decision latency in the run manifest.
    #[arg(long, value_parser = parse_positive_f64)]
    pub frame_rate: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_PSNR_CAP)]
    pub cap: f64,
    /// Verdict output (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Score record files (repeatable).
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub tau: u64,
    /// Also fit one line across all domains.
    #[arg(long)]
    pub pooled: bool,
    /// Output directory for regression.json and scatter.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("oodwatch: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Corpus(a) => commands::corpus::run(a, cli.quiet),
        Command::Score(a) => commands::score::run(a, cli.quiet),
        Command::Calibrate(a) => commands::calibrate::run(a, cli.quiet),
        Command::Monitor(a) => commands::monitor::run(a, cli.quiet),
        Command::Analyze(a) => commands::analyze::run(a, cli.quiet),
    }
}
