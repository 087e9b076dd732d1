//! Append-only JSONL caches for responses and embeddings.
//!
//! Each file is loaded once into memory; a miss appends exactly one line and
//! flushes it, so repeated calls never rewrite or duplicate data and an
//! interrupted run loses at most the line being written.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FILE_NAME: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.');

/// File-system-safe name for a model id (`Qwen/Qwen3-8B` becomes `Qwen%2FQwen3-8B`).
pub fn cache_file_name(id: &str) -> String {
    let encoded = utf8_percent_encode(id, FILE_NAME).to_string();
    // "." and ".." are not usable file names
    match encoded.as_str() {
        "." => "%2E".into(),
        ".." => "%2E%2E".into(),
        _ => encoded,
    }
}

trait Keyed {
    fn key(&self) -> String;
}

struct AppendLog<T> {
    path: PathBuf,
    entries: HashMap<String, T>,
    writer: Option<File>,
}

impl<T: Keyed + Serialize + DeserializeOwned + Clone> AppendLog<T> {
    fn open(path: PathBuf) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.is_empty() {
                    continue;
                }
                let record: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                entries.entry(record.key()).or_insert(record);
            }
        }
        Ok(Self {
            path,
            entries,
            writer: None,
        })
    }

    fn get(&self, key: &str) -> Option<&T> {
        self.entries.get(key)
    }

    /// Appends `record` unless its key is already present. Returns the stored record.
    fn insert(&mut self, record: T) -> Result<T> {
        let key = record.key();
        if let Some(existing) = self.entries.get(&key) {
            return Ok(existing.clone());
        }
        if self.writer.is_none() {
            if let Some(parent) = self.path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            self.writer = Some(file);
        }
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        let w = self.writer.as_mut().expect("opened above");
        w.write_all(&line)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.entries.insert(key, record.clone());
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResponseLine {
    prompt_id: String,
    config_hash: String,
    text: String,
}

impl Keyed for ResponseLine {
    fn key(&self) -> String {
        format!("{}\u{0}{}", self.prompt_id, self.config_hash)
    }
}

/// Responses under `<dir>/responses/<model_id>.jsonl`.
pub struct ResponseCache {
    dir: PathBuf,
    logs: Mutex<HashMap<String, AppendLog<ResponseLine>>>,
}

impl ResponseCache {
    pub fn new(cache_dir: impl AsRef<Path>) -> Self {
        Self {
            dir: cache_dir.as_ref().join("responses"),
            logs: Mutex::new(HashMap::new()),
        }
    }

    pub fn path_for(&self, model_id: &str) -> PathBuf {
        self.dir.join(format!("{}.jsonl", cache_file_name(model_id)))
    }

    fn with_log<R>(
        &self,
        model_id: &str,
        f: impl FnOnce(&mut AppendLog<ResponseLine>) -> Result<R>,
    ) -> Result<R> {
        let mut logs = self.logs.lock().expect("cache lock poisoned");
        if !logs.contains_key(model_id) {
            let log = AppendLog::open(self.path_for(model_id))?;
            logs.insert(model_id.to_string(), log);
        }
        f(logs.get_mut(model_id).expect("inserted above"))
    }

    pub fn get(&self, model_id: &str, prompt_id: &str, config_hash: &str) -> Result<Option<String>> {
        self.with_log(model_id, |log| {
            Ok(log
                .get(&format!("{prompt_id}\u{0}{config_hash}"))
                .map(|r| r.text.clone()))
        })
    }

    /// Stores a response; if one is already cached for the key, that one wins
    /// and is returned.
    pub fn put(&self, model_id: &str, prompt_id: &str, config_hash: &str, text: &str) -> Result<String> {
        self.with_log(model_id, |log| {
            log.insert(ResponseLine {
                prompt_id: prompt_id.into(),
                config_hash: config_hash.into(),
                text: text.into(),
            })
            .map(|r| r.text)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingLine {
    key: String,
    values: Vec<f64>,
}

impl Keyed for EmbeddingLine {
    fn key(&self) -> String {
        self.key.clone()
    }
}

/// Embeddings under `<dir>/embeddings/<embedder_id>.jsonl`, keyed by a digest
/// of the embedded text.
pub struct EmbeddingCache {
    dir: PathBuf,
    logs: Mutex<HashMap<String, AppendLog<EmbeddingLine>>>,
}

impl EmbeddingCache {
    pub fn new(cache_dir: impl AsRef<Path>) -> Self {
        Self {
            dir: cache_dir.as_ref().join("embeddings"),
            logs: Mutex::new(HashMap::new()),
        }
    }

    pub fn path_for(&self, embedder_id: &str) -> PathBuf {
        self.dir.join(format!("{}.jsonl", cache_file_name(embedder_id)))
    }

    fn with_log<R>(
        &self,
        embedder_id: &str,
        f: impl FnOnce(&mut AppendLog<EmbeddingLine>) -> Result<R>,
    ) -> Result<R> {
        let mut logs = self.logs.lock().expect("cache lock poisoned");
        if !logs.contains_key(embedder_id) {
            let log = AppendLog::open(self.path_for(embedder_id))?;
            logs.insert(embedder_id.to_string(), log);
        }
        f(logs.get_mut(embedder_id).expect("inserted above"))
    }

    pub fn get(&self, embedder_id: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.with_log(embedder_id, |log| Ok(log.get(key).map(|r| r.values.clone())))
    }

    /// Length of any vector already cached for this embedder.
    pub fn known_dim(&self, embedder_id: &str) -> Result<Option<usize>> {
        self.with_log(embedder_id, |log| {
            Ok(log.entries.values().next().map(|r| r.values.len()))
        })
    }

    pub fn put(&self, embedder_id: &str, key: &str, values: Vec<f64>) -> Result<Vec<f64>> {
        self.with_log(embedder_id, |log| {
            log.insert(EmbeddingLine {
                key: key.into(),
                values,
            })
            .map(|r| r.values)
        })
    }
}
