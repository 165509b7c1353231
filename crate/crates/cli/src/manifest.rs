//! Per-stage manifests: effective config, seed and SHA-256 of every input
//! and output, so each artifact can be traced and verified.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub tool_version: String,
    pub seed: u64,
    pub args: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
    /// Relative path under the output root -> SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn tool_version() -> String {
    format!("stackplay {} ({})", env!("CARGO_PKG_VERSION"), env!("STACKPLAY_GIT_DESCRIBE"))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::pipeline(format!("cannot read {}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn rel(path: &Path) -> String {
    path.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Collects a stage's inputs and outputs and writes its manifest.
pub struct StageRecord<'a> {
    root: &'a Path,
    dir: PathBuf,
    manifest: Manifest,
}

impl<'a> StageRecord<'a> {
    /// `dir` is relative to `root` and is created if needed.
    pub fn new(root: &'a Path, dir: impl Into<PathBuf>, stage: &str, seed: u64, config: BTreeMap<String, String>) -> Result<Self, CliError> {
        let dir = dir.into();
        std::fs::create_dir_all(root.join(&dir))
            .map_err(|e| CliError::pipeline(format!("cannot create {}: {e}", root.join(&dir).display())))?;
        Ok(StageRecord {
            root,
            dir,
            manifest: Manifest {
                stage: stage.to_string(),
                tool_version: tool_version(),
                seed,
                args: BTreeMap::new(),
                config,
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
            },
        })
    }

    pub fn arg(&mut self, key: &str, value: impl ToString) {
        self.manifest.args.insert(key.to_string(), value.to_string());
    }

    /// Absolute path of `name` inside this stage's directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(&self.dir).join(name)
    }

    /// Verifies an upstream artifact against its producer's manifest and
    /// records it as an input.
    pub fn require(&mut self, stage_dir: impl AsRef<Path>, name: &str, producer: &str) -> Result<PathBuf, CliError> {
        let (path, hash) = verify(self.root, stage_dir.as_ref(), name, producer)?;
        self.manifest.inputs.insert(rel(&stage_dir.as_ref().join(name)), hash);
        Ok(path)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::pipeline(format!("cannot create {}: {e}", parent.display())))?;
        }
        std::fs::write(&path, bytes).map_err(|e| CliError::pipeline(format!("cannot write {}: {e}", path.display())))?;
        self.track(name)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::pipeline(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Records a file that something else already wrote into the stage dir.
    pub fn track(&mut self, name: &str) -> Result<(), CliError> {
        let hash = sha256_file(&self.path(name))?;
        self.manifest.outputs.insert(rel(&self.dir.join(name)), hash);
        Ok(())
    }

    pub fn finish(self) -> Result<Manifest, CliError> {
        let path = self.root.join(&self.dir).join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::pipeline(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::pipeline(format!("cannot write {}: {e}", path.display())))?;
        log::info!("{}: wrote {} files to {}", self.manifest.stage, self.manifest.outputs.len(), self.root.join(&self.dir).display());
        Ok(self.manifest)
    }
}

/// Checks `root/stage_dir/name` exists and matches the hash in
/// `root/stage_dir/manifest.json`.
pub fn verify(root: &Path, stage_dir: &Path, name: &str, producer: &str) -> Result<(PathBuf, String), CliError> {
    let path = root.join(stage_dir).join(name);
    let key = rel(&stage_dir.join(name));
    let mpath = root.join(stage_dir).join(MANIFEST_FILE);
    let missing = || CliError::pipeline(format!("missing upstream artifact {key}; run `stackplay {producer}` first"));
    let text = std::fs::read_to_string(&mpath).map_err(|_| missing())?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::pipeline(format!("unreadable manifest {}: {e}; re-run `stackplay {producer}`", mpath.display())))?;
    let want = manifest.outputs.get(&key).ok_or_else(missing)?;
    if !path.exists() {
        return Err(missing());
    }
    let got = sha256_file(&path)?;
    if &got != want {
        return Err(CliError::pipeline(format!(
            "upstream artifact {key} does not match its manifest (modified or stale); re-run `stackplay {producer}`"
        )));
    }
    Ok((path, got))
}
