use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("DATGAN_GIT_REV"));

/// Sidecar written next to every artifact. Contains nothing that changes
/// between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub artifact: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Content hash of the training panel, when the artifact depends on one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_hash: Option<String>,
    pub code_version: String,
    /// `sha256` of each file, sorted by name.
    pub files: Vec<FileDigest>,
    /// The resolved configuration, so the artifact can be regenerated.
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of the resolved configuration.
pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(cfg)?.as_bytes()))
}

pub fn digest_files(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let bytes = fs::read(p).with_context(|| format!("hashing {}", p.display()))?;
        out.push(FileDigest {
            name: p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256: sha256_hex(&bytes),
        });
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

impl Provenance {
    pub fn new(artifact: &str, command: &str, cfg: &RunConfig, seed: u64, files: &[PathBuf]) -> Result<Self> {
        Ok(Self {
            artifact: artifact.to_string(),
            command: command.to_string(),
            config_hash: config_hash(cfg)?,
            seed,
            data_hash: None,
            code_version: CODE_VERSION.to_string(),
            files: digest_files(files)?,
            config: cfg.clone(),
        })
    }

    pub fn with_data_hash(mut self, hash: u64) -> Self {
        self.data_hash = Some(format!("{hash:016x}"));
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `panel.csv` -> `panel.csv.provenance.json`.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    artifact.with_file_name(name)
}
