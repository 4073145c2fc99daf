//! Run manifests: enough to re-run a command and check its inputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved arguments.
    pub config: serde_json::Value,
    pub toolkit_version: String,
    /// SHA-256 of every input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    /// Derived values worth recording next to the config.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("argument structs serialize"),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: BTreeMap::new(),
            notes: BTreeMap::new(),
        }
    }

    pub fn digest_bytes(&mut self, path: &Path, bytes: &[u8]) {
        self.input_digests
            .insert(path.display().to_string(), hex::encode(Sha256::digest(bytes)));
    }

    pub fn digest_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(CliError::io(path))?;
        self.digest_bytes(path, &bytes);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(
            key.to_string(),
            serde_json::to_value(value).expect("note values serialize"),
        );
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(CliError::io(path))
    }

    /// Writes to `explicit`, else to `default`, else reports on stderr.
    pub fn emit(&self, explicit: Option<&Path>, default: Option<PathBuf>, quiet: bool) -> Result<()> {
        match explicit.map(Path::to_path_buf).or(default) {
            Some(path) => self.write(&path),
            None => {
                if !quiet {
                    eprintln!("{}", serde_json::to_string(self).expect("manifest serializes"));
                }
                Ok(())
            }
        }
    }
}

/// `<file>.run.json` next to an output file.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    path.with_file_name(name)
}
