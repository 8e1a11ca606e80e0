use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument vector; with the embedded config it reproduces the run.
    pub arguments: Vec<String>,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub config_text: Option<String>,
    pub artifact_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
    pub master_seed: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            arguments: std::env::args().collect(),
            config_path: None,
            config_sha256: None,
            config_text: None,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
            master_seed: None,
        }
    }

    /// Records the config exactly as read.
    pub fn with_config(mut self, path: Option<&Path>, text: &str) -> Self {
        self.config_path = path.map(Path::to_path_buf);
        self.config_sha256 = Some(sha256_hex(text.as_bytes()));
        self.config_text = Some(text.to_string());
        self
    }

    pub fn write(mut self, path: &Path) -> std::io::Result<()> {
        self.finished_at = now();
        let json = serde_json::to_string_pretty(&self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
    }
}

/// `<file>.manifest.json` next to a file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
