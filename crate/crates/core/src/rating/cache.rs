//! On-disk response cache keyed by prompt hash, one TSV record per line:
//! `<sha256-hex>\t<backend-id>\t<escaped-raw-response>`.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug)]
pub struct PromptCache {
    path: PathBuf,
    entries: HashMap<String, (String, String)>, // hash -> (backend id, raw)
}

impl PromptCache {
    /// Load (or start) a cache at `path`. Unreadable lines are skipped.
    pub fn open(path: &Path) -> io::Result<PromptCache> {
        let mut entries = HashMap::new();
        match fs::read_to_string(path) {
            Ok(text) => {
                for line in text.lines() {
                    let mut parts = line.splitn(3, '\t');
                    if let (Some(hash), Some(backend), Some(raw)) =
                        (parts.next(), parts.next(), parts.next())
                    {
                        entries.insert(
                            hash.to_string(),
                            (backend.to_string(), unescape(raw)),
                        );
                    }
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
        Ok(PromptCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    /// Cached raw response for this prompt, if the backend matches.
    pub fn get(&self, prompt: &str, backend_id: &str) -> Option<&str> {
        let (cached_backend, raw) = self.entries.get(&prompt_hash(prompt))?;
        (cached_backend == backend_id).then_some(raw.as_str())
    }

    /// Record a response and append it to the cache file.
    pub fn put(&mut self, prompt: &str, backend_id: &str, raw: &str) -> io::Result<()> {
        let hash = prompt_hash(prompt);
        let record = format!("{hash}\t{backend_id}\t{}\n", escape(raw));
        self.entries
            .insert(hash, (backend_id.to_string(), raw.to_string()));
        use std::io::Write;
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        file.write_all(record.as_bytes())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn escape(raw: &str) -> String {
    raw.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n")
}

fn unescape(escaped: &str) -> String {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
