//! Stage manifests: which inputs (by content hash) and which parameters
//! produced a set of output files.
//!
//! Each output group `A` gets `A.manifest.json`. A later stage reading `A`
//! checks the file against that manifest, and the manifest's own inputs
//! against their current contents, so edits anywhere upstream surface as a
//! stale-artifact error instead of silently mixed results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Failure, Result};
use crate::formats::{read_json, write_json};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub version: String,
    pub seed: Option<u64>,
    pub params: Value,
    pub inputs: Vec<FileHash>,
    /// Output file names, relative to the manifest's directory.
    pub outputs: Vec<FileHash>,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Refuses to clobber any existing output unless `overwrite` is set.
pub fn guard_outputs(paths: &[PathBuf], overwrite: bool) -> Result<()> {
    if overwrite {
        return Ok(());
    }
    for p in paths {
        for candidate in [p.clone(), manifest_path(p)] {
            if candidate.exists() {
                return Err(Failure::config(format!(
                    "refusing to overwrite {} (pass --overwrite to replace it)",
                    candidate.display()
                )));
            }
        }
    }
    Ok(())
}

/// Raw input supplied by the user. A missing file is a config error.
pub fn raw_input(path: &Path) -> Result<FileHash> {
    if !path.is_file() {
        return Err(Failure::config(format!("input file {} does not exist", path.display())));
    }
    hash_entry(path)
}

/// Artifact written by an earlier stage. Missing or stale artifacts are
/// data errors naming the stage to rerun.
pub fn upstream_input(path: &Path, producer: &str) -> Result<FileHash> {
    if !path.is_file() {
        return Err(Failure::data(format!(
            "missing upstream artifact {}; run `opkb {producer}` first",
            path.display()
        )));
    }
    let entry = hash_entry(path)?;
    let mpath = manifest_path(path);
    if mpath.is_file() {
        let m: StageManifest = read_json(&mpath)?;
        let name = file_name(path);
        if let Some(rec) = m.outputs.iter().find(|o| o.path == name) {
            if rec.sha256 != entry.sha256 {
                return Err(Failure::data(format!(
                    "stale artifact {}: it changed after `opkb {}` wrote it; rerun that stage",
                    path.display(),
                    m.stage
                )));
            }
        }
        for input in &m.inputs {
            let p = Path::new(&input.path);
            if p.is_file() && file_sha256(p)? != input.sha256 {
                return Err(Failure::data(format!(
                    "stale artifact {}: its input {} changed since `opkb {}` ran; rerun that stage",
                    path.display(),
                    input.path,
                    m.stage
                )));
            }
        }
    }
    Ok(entry)
}

fn hash_entry(path: &Path) -> Result<FileHash> {
    Ok(FileHash {
        path: path.to_string_lossy().into_owned(),
        sha256: file_sha256(path)?,
    })
}

/// Collects what a stage read, then writes manifests for what it wrote.
#[derive(Debug)]
pub struct Stage {
    pub name: String,
    pub seed: Option<u64>,
    pub params: Value,
    pub inputs: Vec<FileHash>,
}

impl Stage {
    pub fn new(name: &str, seed: Option<u64>, params: Value) -> Self {
        Stage {
            name: name.into(),
            seed,
            params,
            inputs: Vec::new(),
        }
    }

    pub fn raw(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(raw_input(path)?);
        Ok(())
    }

    pub fn upstream(&mut self, path: &Path, producer: &str) -> Result<()> {
        self.inputs.push(upstream_input(path, producer)?);
        Ok(())
    }

    /// Writes `<first file>.manifest.json` for each group of output files.
    pub fn finish(&self, groups: &[Vec<PathBuf>]) -> Result<()> {
        for group in groups {
            let Some(first) = group.first() else { continue };
            let outputs = group
                .iter()
                .map(|p| {
                    Ok(FileHash {
                        path: file_name(p),
                        sha256: file_sha256(p)?,
                    })
                })
                .collect::<Result<_>>()?;
            let m = StageManifest {
                stage: self.name.clone(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed: self.seed,
                params: self.params.clone(),
                inputs: self.inputs.clone(),
                outputs,
            };
            write_json(&manifest_path(first), &m)?;
        }
        Ok(())
    }
}
