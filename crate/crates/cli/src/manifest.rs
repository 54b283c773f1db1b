use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Written next to every report as `<out>.manifest.json`. `config` is the
/// fully resolved config; `ncreg <subcommand> --config <manifest>` reruns it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

pub struct RunClock {
    started: Instant,
    started_unix_s: f64,
}

impl RunClock {
    pub fn start() -> Self {
        let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        RunClock { started: Instant::now(), started_unix_s: unix }
    }

    pub fn manifest(
        &self,
        subcommand: &str,
        config: serde_json::Value,
        seeds: Vec<u64>,
        inputs: Vec<InputFile>,
        outputs: Vec<String>,
    ) -> RunManifest {
        let canonical = serde_json::to_string(&config).expect("config values serialize");
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: sha256_hex(canonical.as_bytes()),
            config,
            seeds,
            inputs,
            outputs,
            threads: rayon::current_num_threads(),
            started_unix_s: self.started_unix_s,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        }
    }
}
