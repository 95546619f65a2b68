//! Run manifests: one JSON file written alongside each command's outputs,
//! carrying the command, config echo, input/output paths, tool version,
//! warning counters, and a content hash per output. No wall-clock data, so
//! re-running a command yields byte-identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use nuwa_core::error::{Error, Result};

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    pub warnings: BTreeMap<String, u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Registers an already-written output file, hashing its content.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.outputs.push(OutputEntry {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn warn(&mut self, key: &str, count: u64) {
        self.warnings.insert(key.to_string(), count);
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write_alongside(&self, primary_output: &Path) -> Result<()> {
        let mut name = primary_output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
        std::fs::write(&path, body + "\n").map_err(|e| Error::io(&path, e))
    }
}
