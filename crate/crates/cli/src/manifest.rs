//! Run manifests: the fully resolved configuration, input checksums, and
//! timing for one run. Every metrics file points back at exactly one
//! manifest, which is what makes runs reproducible and auditable.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dxchat::dialogue::SessionConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub split: String,
    pub ie_code: String,
    pub n: usize,
    pub seed: u64,
    pub session: SessionConfig,
    pub backend: String,
    pub zero_shot: bool,
    pub parallelism: usize,
    /// `synthetic:<pool>` or the dataset directory.
    pub data_source: String,
    /// sha256 per input file; `embedded` assets hash the compiled defaults.
    pub checksums: BTreeMap<String, String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub sessions_ok: usize,
    pub sessions_failed: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub requests: u64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
