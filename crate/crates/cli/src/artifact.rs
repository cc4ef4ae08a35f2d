//! Stage artifact directories: payload files plus a `manifest.json` that
//! records what the payload was computed from.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use promptbow_core::digest::{json_digest, sha256_hex};
use serde::{Deserialize, Serialize};

use crate::PipelineError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    /// Digest of the config digest and every input's content digest.
    pub key: String,
    pub config_digest: String,
    /// Content digest of each upstream artifact this one was built from.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each payload file.
    pub files: BTreeMap<String, String>,
    /// Digest of `files`; what downstream stages record as their input.
    pub content_digest: String,
}

pub fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn stage_key(stage: &str, config_digest: &str, inputs: &BTreeMap<String, String>) -> String {
    json_digest(&(stage, config_digest, inputs))
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Option<Manifest>, PipelineError> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| PipelineError::Artifact(format!("{}: {e}", path.display())))
    }

    /// True when every payload file is still present with its recorded digest.
    pub fn payload_intact(&self, dir: &Path) -> bool {
        self.files.iter().all(|(name, digest)| file_digest(&dir.join(name)).is_ok_and(|d| &d == digest))
    }
}

/// Payload files written into a staging directory, published atomically by
/// [`Staging::commit`].
pub struct Staging {
    final_dir: PathBuf,
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Staging {
    pub fn new(final_dir: &Path) -> Result<Self, PipelineError> {
        let name = final_dir.file_name().and_then(|n| n.to_str()).unwrap_or("stage");
        let dir = final_dir.with_file_name(format!(".{name}.partial"));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(Staging { final_dir: final_dir.to_path_buf(), dir, files: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn write_jsonl<'a, T: Serialize + 'a>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = &'a T>,
    ) -> Result<(), PipelineError> {
        let mut bytes = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut bytes, row).map_err(|e| PipelineError::Artifact(e.to_string()))?;
            bytes.push(b'\n');
        }
        self.write(name, &bytes)
    }

    /// Registers a file some library call wrote directly into the staging dir.
    pub fn adopt(&mut self, name: &str) -> Result<(), PipelineError> {
        let digest = file_digest(&self.path(name))?;
        self.files.insert(name.to_string(), digest);
        Ok(())
    }

    pub fn commit(
        self,
        stage: &str,
        config_digest: String,
        inputs: BTreeMap<String, String>,
    ) -> Result<Manifest, PipelineError> {
        let manifest = Manifest {
            stage: stage.to_string(),
            key: stage_key(stage, &config_digest, &inputs),
            config_digest,
            inputs,
            content_digest: json_digest(&self.files),
            files: self.files,
        };
        let path = self.dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| PipelineError::Artifact(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        if self.final_dir.exists() {
            fs::remove_dir_all(&self.final_dir).map_err(|e| PipelineError::io(&self.final_dir, e))?;
        }
        fs::rename(&self.dir, &self.final_dir).map_err(|e| PipelineError::io(&self.final_dir, e))?;
        Ok(manifest)
    }
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Artifact(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Artifact(format!("{}: {e}", path.display())))
}
