use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Mode};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub status: &'static str,
    pub verb: &'static str,
    pub seed: u64,
    pub deterministic: bool,
    pub threads: Option<usize>,
    pub crate_version: &'static str,
    /// The config file exactly as read.
    pub config: String,
    /// The parsed config with every default filled in.
    pub resolved_config: String,
    pub failure: Option<String>,
    pub summary: Value,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(mode: Mode, text: &str, config: &ExperimentConfig, deterministic: bool, threads: Option<usize>) -> Self {
        Manifest {
            status: "OK",
            verb: mode.verb(),
            seed: config.seed,
            deterministic,
            threads,
            crate_version: env!("CARGO_PKG_VERSION"),
            config: text.to_string(),
            resolved_config: config.to_toml(),
            failure: None,
            summary: Value::Null,
            files: Vec::new(),
        }
    }

    pub fn fail(&mut self, message: String) {
        self.status = "FAILED";
        self.failure = Some(message);
    }

    /// Records size and SHA-256 of each file, named relative to `dir`,
    /// sorted by name.
    pub fn add_files(&mut self, dir: &Path, files: &[PathBuf]) -> Result<()> {
        for path in files {
            let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
            let name = path.strip_prefix(dir).unwrap_or(path).to_string_lossy().replace('\\', "/");
            self.files.push(FileEntry { name, bytes: bytes.len() as u64, sha256: hex::encode(Sha256::digest(&bytes)) });
        }
        self.files.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
