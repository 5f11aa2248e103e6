use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{fatal, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| fatal(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Provenance record written next to every artifact-producing command's
/// outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
    started_at: DateTime<Utc>,
}

impl ManifestBuilder {
    pub fn start(command: &str, config: impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            seed: None,
            started_at: Utc::now(),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.to_path_buf());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Digests inputs and outputs and writes the manifest to `dest`.
    pub fn finish(self, outputs: &[PathBuf], dest: &Path) -> CliResult<()> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: self.config,
            inputs: self.inputs.iter().map(|p| FileDigest::of(p)).collect::<CliResult<_>>()?,
            outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<CliResult<_>>()?,
            seed: self.seed,
            started_at: self.started_at,
            finished_at: Utc::now(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(fatal)?;
        std::fs::write(dest, text + "\n").map_err(|e| fatal(format!("{}: {e}", dest.display())))
    }
}

/// `out.jsonl` -> `out.jsonl.manifest.json`.
pub fn manifest_for_file(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
