//! JSON-lines reading and writing for score records and corpus manifests.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use oodwatch_core::ScoreRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One line of a corpus manifest. `path` is relative to the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: String,
    pub domain: String,
}

/// Parses one non-blank line; `origin` and `line_no` name it in errors.
pub fn parse_line<T: DeserializeOwned>(line: &str, origin: &str, line_no: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| CliError::Input(format!("{origin}:{line_no}: {e}")))
}

pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let origin = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, &origin, i + 1)?);
    }
    Ok(out)
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoreRecord>> {
    read_all(path)
}

pub fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}
