//! Line-delimited corpus files: one JSON record per user.
//!
//! ```text
//! {"user_id":"u1","label":"diagnosed","split":"train","posts":[{"id":"p1","ts":1600000000,"text":"..."}]}
//! ```

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Publication, Result, Split, Timeline, UserClass};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PostRecord {
    pub id: String,
    pub ts: i64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub user_id: String,
    pub label: UserClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub posts: Vec<PostRecord>,
}

impl From<&Timeline> for CorpusRecord {
    fn from(t: &Timeline) -> Self {
        CorpusRecord {
            user_id: t.user_id.clone(),
            label: t.label,
            split: t.split,
            posts: t
                .publications
                .iter()
                .map(|p| PostRecord { id: p.post_id.clone(), ts: p.timestamp, text: p.text.clone() })
                .collect(),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    parse_corpus(&text)
}

/// Parses and validates corpus text. Lines are decoded in parallel; checks
/// that span records (duplicate users and posts) run afterwards in file order.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)).collect();

    let parsed: Vec<(usize, std::result::Result<CorpusRecord, String>)> = lines
        .par_iter()
        .map(|&(n, l)| (n, serde_json::from_str::<CorpusRecord>(l).map_err(|e| e.to_string())))
        .collect();

    let mut users = HashSet::new();
    let mut posts = HashSet::new();
    let mut timelines = Vec::with_capacity(parsed.len());
    for (line, rec) in parsed {
        let rec = rec.map_err(|message| CorpusError::Schema { line, message })?;
        if rec.user_id.trim().is_empty() {
            return Err(CorpusError::Schema { line, message: "empty user_id".into() });
        }
        if !users.insert(rec.user_id.clone()) {
            return Err(CorpusError::DuplicateUser { line, user_id: rec.user_id });
        }
        let mut publications = Vec::with_capacity(rec.posts.len());
        for p in rec.posts {
            if p.text.trim().is_empty() {
                return Err(CorpusError::Schema { line, message: format!("post `{}` has empty text", p.id) });
            }
            if !posts.insert(p.id.clone()) {
                return Err(CorpusError::Schema { line, message: format!("duplicate post id `{}`", p.id) });
            }
            publications.push(Publication {
                user_id: rec.user_id.clone(),
                post_id: p.id,
                timestamp: p.ts,
                text: p.text,
            });
        }
        let mut timeline = Timeline { user_id: rec.user_id, label: rec.label, split: rec.split, publications };
        timeline.normalize_order();
        timelines.push(timeline);
    }
    Ok(Corpus { timelines })
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for t in &corpus.timelines {
        serde_json::to_writer(&mut out, &CorpusRecord::from(t))?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
