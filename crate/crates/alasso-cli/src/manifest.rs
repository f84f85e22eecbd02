//! Run manifests: the reproducibility record every command writes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io;

/// Wall-clock bookkeeping. Kept in its own field so that everything *else*
/// in the manifest — and all output files — is byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub unix_start_secs: u64,
    pub elapsed_ms: u64,
}

/// Everything needed to reproduce a command's outputs bit-for-bit: the
/// subcommand, its fully resolved configuration, the seeds in play, and
/// checksums of all files read and written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub library_version: String,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_checksums: BTreeMap<String, String>,
    /// SHA-256 of each output file, keyed by file name within the output
    /// directory. A replay must reproduce these exactly.
    pub output_checksums: BTreeMap<String, String>,
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: serde_json::Value,
        seeds: BTreeMap<String, u64>,
        elapsed_ms: u64,
    ) -> Self {
        let unix_start_secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        RunManifest {
            command: command.to_string(),
            config,
            seeds,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            input_checksums: BTreeMap::new(),
            output_checksums: BTreeMap::new(),
            timing: Timing {
                unix_start_secs,
                elapsed_ms,
            },
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.input_checksums
            .insert(path.display().to_string(), io::sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, name: &str, bytes: &[u8]) {
        self.output_checksums
            .insert(name.to_string(), io::sha256_hex(bytes));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Replay(format!("{}: {e}", path.display())))
    }

    /// Re-checks that every recorded input file still has the checksum the
    /// original run saw; a replay on changed inputs cannot reproduce bytes.
    pub fn verify_inputs(&self) -> Result<()> {
        for (path, expected) in &self.input_checksums {
            let actual = io::sha256_file(Path::new(path))?;
            if &actual != expected {
                return Err(CliError::Replay(format!(
                    "input `{path}` has changed since the manifest was written"
                )));
            }
        }
        Ok(())
    }
}

/// Resolves the file name a command's manifest is written under.
pub fn manifest_name(command: &str) -> String {
    format!("{command}_manifest.json")
}

/// Joins an output directory and file name, creating the directory.
pub fn prepare_output(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.join(name))
}
