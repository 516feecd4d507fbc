use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Artifact {
    pub fn of(file: &str, contents: &[u8]) -> Self {
        Artifact {
            file: file.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len() as u64,
        }
    }
}

/// One invariant verdict bound to the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub kind: String,
    /// SHA-256 of the canonical config JSON.
    pub config_hash: String,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn load(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = std::fs::read(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        serde_json::from_slice(&bytes).map_err(|e| RunError::Report(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        let path = dir.join(MANIFEST_FILE);
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifests serialize");
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })
    }
}
