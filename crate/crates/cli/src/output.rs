use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Files produced by one command, kept in memory and written in path order.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    /// Simulated-time milestones reported under `timings`.
    milestones: BTreeMap<String, Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

impl Artifacts {
    pub fn add(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(path.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, path: impl Into<String>, value: &T) -> Result<()> {
        self.add(path, json_bytes(value)?);
        Ok(())
    }

    pub fn milestone(&mut self, name: &str, value: impl Serialize) {
        self.milestones
            .insert(name.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    /// Moves every file under `prefix/`; milestones are dropped.
    pub fn nest(&mut self, prefix: &str, other: Artifacts) {
        for (path, bytes) in other.files {
            self.files.insert(format!("{prefix}/{path}"), bytes);
        }
    }

    /// Writes all files plus `manifest.json` under `root`.
    pub fn write(self, root: &Path, command: &str, config: &Value, grid: &Value, seed: u64) -> Result<String> {
        let config_bytes = serde_json::to_vec(config)?;
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(path, bytes)| json!({"path": path, "sha256": sha256_hex(bytes), "bytes": bytes.len()}))
            .collect();
        let manifest = json!({
            "tool": "kolmo",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config_sha256": sha256_hex(&config_bytes),
            "spec_sha256": sha256_hex(&serde_json::to_vec(&config["system"])?),
            "config": config,
            "grid": grid,
            "timings": self.milestones,
            "files": files,
        });
        let manifest_bytes = json_bytes(&manifest)?;
        for (path, bytes) in &self.files {
            let target = root.join(path);
            if let Some(dir) = target.parent() {
                fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            fs::write(&target, bytes).with_context(|| format!("cannot write {}", target.display()))?;
        }
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        fs::write(root.join("manifest.json"), &manifest_bytes)?;
        Ok(sha256_hex(&manifest_bytes))
    }
}
