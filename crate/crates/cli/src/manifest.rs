//! Per-stage manifests recording content hashes of inputs and outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of every regular file beneath `dir`, keyed by sorted relative path.
pub fn sha256_tree(dir: &Path) -> anyhow::Result<String> {
    let mut files = Vec::new();
    collect(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for (rel, path) in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(fs::read(&path).with_context(|| format!("reading {}", path.display()))?);
        h.update([0]);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push((rel, path));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub parameters: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Tracks one stage's reads and writes beneath the run directory.
pub struct StageRun<'a> {
    pub cfg: &'a RunConfig,
    manifest: StageManifest,
}

impl<'a> StageRun<'a> {
    /// Clears any previous output of `stage`.
    pub fn start(cfg: &'a RunConfig, stage: &str) -> Result<Self, CliError> {
        let dir = cfg.run_dir.join(stage);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(StageRun {
            cfg,
            manifest: StageManifest {
                stage: stage.to_string(),
                parameters: BTreeMap::new(),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.cfg.run_dir.join(rel)
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.manifest.parameters.insert(key.to_string(), value.to_string());
    }

    /// Reads a file produced by an earlier stage.
    pub fn read(&mut self, rel: &str) -> Result<String, CliError> {
        let path = self.path(rel);
        let bytes = fs::read(&path).map_err(|_| CliError::MissingInput(path.clone()))?;
        self.manifest.inputs.insert(rel.to_string(), sha256_hex(&bytes));
        String::from_utf8(bytes).map_err(|e| CliError::StageFailure(anyhow::anyhow!("{}: {e}", path.display())))
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }

    /// Records an input that lives outside the run directory.
    pub fn external_input(&mut self, key: &str, hash: String) {
        self.manifest.inputs.insert(key.to_string(), hash);
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        fs::write(&path, contents.as_ref()).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.insert(rel.to_string(), sha256_hex(contents.as_ref()));
        Ok(())
    }

    /// Records a file some library call already wrote.
    pub fn written(&mut self, rel: &str) -> Result<(), CliError> {
        let path = self.path(rel);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.outputs.insert(rel.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(self) -> Result<StageManifest, CliError> {
        let rel = format!("{}/{MANIFEST_FILE}", self.manifest.stage);
        let body = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        let path = self.path(&rel);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest)
    }
}

pub fn read_manifest(run_dir: &Path, stage: &str) -> Option<StageManifest> {
    let text = fs::read_to_string(run_dir.join(stage).join(MANIFEST_FILE)).ok()?;
    serde_json::from_str(&text).ok()
}
