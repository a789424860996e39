//! Run manifests written beside every artifact-producing command.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    /// Input path to hex sha256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub tool_version: String,
    pub started: String,
    pub finished: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, args: Vec<String>, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            args,
            config,
            inputs: BTreeMap::new(),
            seeds: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<()> {
        self.finished = Some(now());
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(MANIFEST_FILE), json)
    }
}
