//! Checksummed stage outputs and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(sha256_bytes(&fs::read(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn read_json<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<T, Box<dyn std::error::Error + Send + Sync>> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Collects a stage's outputs as `<name>.partial` files and renames them all once the
/// stage has finished. A failed stage leaves its `.partial` files behind.
#[derive(Debug)]
pub struct StageWriter {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl StageWriter {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(StageWriter {
            dir: dir.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(partial_path(&path), bytes)?;
        self.written.insert(name.to_string(), sha256_bytes(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let bytes = json_bytes(value).map_err(io::Error::other)?;
        self.write(name, &bytes)
    }

    /// Renames every output into place and returns `name → sha256`.
    pub fn commit(self) -> io::Result<BTreeMap<String, String>> {
        for name in self.written.keys() {
            let path = self.dir.join(name);
            fs::rename(partial_path(&path), &path)?;
        }
        Ok(self.written)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash over the stage name, the configuration and every input hash.
    pub key: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn new(seed: u64, config_sha256: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256,
            stages: BTreeMap::new(),
        }
    }

    /// Loads `dir/manifest.json` when present and readable.
    pub fn load(dir: &Path) -> Option<Self> {
        let bytes = fs::read(dir.join(MANIFEST)).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    pub fn save(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let bytes = json_bytes(self).map_err(io::Error::other)?;
        let path = dir.join(MANIFEST);
        fs::write(partial_path(&path), &bytes)?;
        fs::rename(partial_path(&path), path)
    }

    /// The recorded stage if its key matches and its outputs are still on disk unchanged.
    pub fn cached(&self, stage: &str, key: &str, dir: &Path) -> Option<&StageRecord> {
        let rec = self.stages.get(stage)?;
        if rec.key != key {
            return None;
        }
        rec.outputs
            .iter()
            .all(|(name, hash)| sha256_file(&dir.join(name)).is_ok_and(|h| &h == hash))
            .then_some(rec)
    }
}

/// Cache key of a stage.
pub fn stage_key(stage: &str, config_sha256: &str, inputs: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update([0]);
    h.update(config_sha256.as_bytes());
    for (k, v) in inputs {
        h.update([0]);
        h.update(k.as_bytes());
        h.update([1]);
        h.update(v.as_bytes());
    }
    hex::encode(h.finalize())
}
