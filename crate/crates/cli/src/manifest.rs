use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every command's outputs. `args`
/// holds the effective options, so `ngmoe replay` can re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
    pub version: String,
    pub args: serde_json::Value,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// SHA-256 of the canonical JSON form of the effective options.
pub fn config_hash(args: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(args.to_string().as_bytes());
    format!("{:x}", h.finalize())
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
