use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use gridplan::config::file_digest;
use gridplan::Error;
use serde::{Deserialize, Serialize};

use crate::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";

/// One file written by a command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub kind: String,
    /// File name relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    /// Hash the file itself carries, when its format has room for one.
    pub config_hash: Option<String>,
    pub written_unix: u64,
}

/// Index of everything produced in one output directory.
///
/// All artifacts in a directory belong to one planning problem (same base
/// hash); per-model config hashes are listed by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub base_hash: String,
    pub config_hashes: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
    pub created_unix: u64,
    pub updated_unix: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(base_hash: &str) -> Self {
        let now = now_unix();
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            base_hash: base_hash.to_string(),
            config_hashes: BTreeMap::new(),
            seeds: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            created_unix: now,
            updated_unix: now,
        }
    }

    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join(MANIFEST_FILE)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// The directory's manifest, or a fresh one. A manifest for a different
    /// planning problem is refused.
    pub fn open(dir: &Path, base_hash: &str) -> CliResult<Self> {
        let path = Self::path_in(dir);
        if !path.exists() {
            return Ok(Self::new(base_hash));
        }
        let m = Self::load(&path)?;
        if m.base_hash != base_hash {
            return Err(Error::HashMismatch {
                artifact: path.display().to_string(),
                expected: base_hash.to_string(),
                found: m.base_hash,
            }
            .into());
        }
        Ok(m)
    }

    /// Hashes `file` (inside `dir`) and records it.
    pub fn record(&mut self, dir: &Path, file: &str, kind: &str, config_hash: Option<&str>) -> CliResult<()> {
        let now = now_unix();
        self.artifacts.insert(
            file.to_string(),
            ArtifactRecord {
                kind: kind.to_string(),
                path: file.to_string(),
                sha256: file_digest(&dir.join(file))?,
                config_hash: config_hash.map(str::to_string),
                written_unix: now,
            },
        );
        self.updated_unix = now;
        Ok(())
    }

    /// Checks that every listed file exists with the recorded digest.
    pub fn verify(&self, dir: &Path) -> CliResult<()> {
        for record in self.artifacts.values() {
            let found = file_digest(&dir.join(&record.path))?;
            if found != record.sha256 {
                return Err(Error::HashMismatch {
                    artifact: record.path.clone(),
                    expected: record.sha256.clone(),
                    found,
                }
                .into());
            }
        }
        Ok(())
    }
}
