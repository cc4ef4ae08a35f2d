//! Durable annotation cache: an append-only JSON-lines file keyed by
//! `(post_id, template_hash, model_id)`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, RelevanceError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub post_id: String,
    pub template_hash: String,
    pub model_id: String,
}

#[derive(Debug, Default)]
pub struct AnnotationCache {
    path: Option<PathBuf>,
    records: HashMap<CacheKey, AnnotationRecord>,
    file: Option<File>,
}

fn read_records(path: &Path) -> Result<(Vec<AnnotationRecord>, usize)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let terminated = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<AnnotationRecord>(line) {
            Ok(r) => out.push(r),
            // A torn final write from an interrupted run.
            Err(_) if i + 1 == lines.len() && !terminated => {}
            Err(e) => return Err(RelevanceError::CacheFormat { line: i + 1, message: e.to_string() }),
        }
    }
    Ok((out, lines.len()))
}

impl AnnotationCache {
    /// Cache that lives only in memory.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates on first write) the cache file at `path`. When a key
    /// appears more than once the first record wins.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let (records, _) = read_records(&path)?;
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            map.entry(r.key()).or_insert(r);
        }
        Ok(AnnotationCache { path: Some(path), records: map, file: None })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<&AnnotationRecord> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.records.contains_key(key)
    }

    /// Stores a record unless its key is already present. Returns whether
    /// the record was new. New records are appended and flushed immediately.
    pub fn insert(&mut self, record: AnnotationRecord) -> Result<bool> {
        let key = record.key();
        if self.records.contains_key(&key) {
            return Ok(false);
        }
        if let Some(path) = &self.path {
            if self.file.is_none() {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir)?;
                }
                self.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
            }
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            let file = self.file.as_mut().unwrap();
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.records.insert(key, record);
        Ok(true)
    }

    /// Rewrites the cache file with one record per key, sorted by key.
    /// Returns `(lines_before, records_after)`.
    pub fn compact(path: impl AsRef<Path>) -> Result<(usize, usize)> {
        let path = path.as_ref();
        let (records, lines_before) = read_records(path)?;
        let mut unique: HashMap<CacheKey, AnnotationRecord> = HashMap::new();
        for r in records {
            unique.entry(r.key()).or_insert(r);
        }
        let mut sorted: Vec<(CacheKey, AnnotationRecord)> = unique.into_iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = BufWriter::new(File::create(&tmp)?);
            for (_, r) in &sorted {
                serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok((lines_before, sorted.len()))
    }
}
