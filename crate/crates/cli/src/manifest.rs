//! Per-command run records and the directory inventory `manifest.json`.
//!
//! Records hold no timestamps or timings, so a rerun with the same config and
//! seed reproduces them byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::formats::write_atomic;
use crate::{CliError, Config};

pub const INVENTORY: &str = "manifest.json";
const TOOL: &str = "wavesense";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileRecord {
    pub fn of(name: &str, bytes: &[u8]) -> Self {
        FileRecord { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub config: Config,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub metrics: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub tool: String,
    pub version: String,
    pub runs: Vec<String>,
    pub files: Vec<FileRecord>,
}

/// Collects the outputs of one command.
#[derive(Debug)]
pub struct Run {
    dir: PathBuf,
    command: String,
    config: Config,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    metrics: BTreeMap<String, Value>,
}

impl Run {
    pub fn new(dir: &Path, command: &str, config: &Config) -> Self {
        Run {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.inputs.push(FileRecord::of(&name, &bytes));
        Ok(bytes)
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.push(FileRecord::of(name, bytes));
        Ok(())
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    /// Writes `<command>.manifest.json` and refreshes the inventory.
    pub fn finish(self) -> Result<RunRecord, CliError> {
        let record = RunRecord {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.clone(),
            config_sha256: sha256_hex(self.config.to_json().as_bytes()),
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            metrics: self.metrics,
        };
        let name = format!("{}.manifest.json", self.command);
        let mut text = serde_json::to_string_pretty(&record).map_err(|e| CliError::Format(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join(&name), text.as_bytes())?;
        refresh_inventory(&self.dir)?;
        Ok(record)
    }
}

/// Rebuilds `manifest.json` from the files currently in `dir`.
pub fn refresh_inventory(dir: &Path) -> Result<Inventory, CliError> {
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == INVENTORY || !entry.file_type().map_err(|e| CliError::io(dir, e))?.is_file() || name.starts_with('.')
        {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| CliError::io(&entry.path(), e))?;
        if let Some(cmd) = name.strip_suffix(".manifest.json") {
            runs.push(cmd.to_string());
        }
        files.push(FileRecord::of(&name, &bytes));
    }
    files.sort_by(|a, b| a.name.cmp(&b.name));
    runs.sort();
    let inv = Inventory { tool: TOOL.to_string(), version: env!("CARGO_PKG_VERSION").to_string(), runs, files };
    let mut text = serde_json::to_string_pretty(&inv).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(&dir.join(INVENTORY), text.as_bytes())?;
    Ok(inv)
}
