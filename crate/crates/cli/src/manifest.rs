use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance written next to every output. Two manifests that agree in
/// everything but `timestamp` describe identical outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    pub output_hashes: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    /// `config` is hashed through its canonical JSON form.
    pub fn new<C: Serialize>(command: Vec<String>, config: &C) -> Self {
        let canon = serde_json::to_vec(config).expect("config serializes");
        Self {
            command,
            config_hash: sha256_hex(&canon),
            input_hashes: BTreeMap::new(),
            output_hashes: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_hashes.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn output(&mut self, name: &str, bytes: &[u8]) {
        self.output_hashes.insert(name.to_string(), sha256_hex(bytes));
    }
}
