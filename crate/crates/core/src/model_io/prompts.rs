use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub dataset: String,
    pub text: String,
}

/// An ordered, hashed prompt sample. The order is part of the identity:
/// representations concatenate embeddings in exactly this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    prompts: Vec<Prompt>,
    seed: Option<u64>,
    hash: String,
}

impl PromptSet {
    pub fn new(prompts: Vec<Prompt>, seed: Option<u64>) -> Result<Self> {
        if prompts.is_empty() {
            return Err(Error::domain("prompt set must not be empty"));
        }
        let mut seen = HashSet::new();
        for p in &prompts {
            if p.text.is_empty() {
                return Err(Error::domain(format!("prompt `{}` has empty text", p.id)));
            }
            if !seen.insert(p.id.as_str()) {
                return Err(Error::domain(format!("duplicate prompt id `{}`", p.id)));
            }
        }
        let hash = prompt_set_hash(&prompts);
        Ok(Self {
            prompts,
            seed,
            hash,
        })
    }

    pub fn prompts(&self) -> &[Prompt] {
        &self.prompts
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Prompt count `t`.
    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    /// Reads a prompts file: one `{"id","dataset","text"}` object per line.
    pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut prompts = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let prompt: Prompt = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            prompts.push(prompt);
        }
        Self::new(prompts, None)
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for p in &self.prompts {
            serde_json::to_writer(&mut w, p)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Digest over the ordered `(id, text)` pairs, length-prefixed so that no two
/// distinct sequences share an encoding.
pub fn prompt_set_hash(prompts: &[Prompt]) -> String {
    let mut h = Sha256::new();
    for p in prompts {
        for field in [&p.id, &p.text] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// A JSONL dataset file and the field holding its prompt text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSource {
    pub name: String,
    pub path: PathBuf,
    pub text_field: String,
    pub id_field: String,
}

impl DatasetSource {
    pub fn new(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            path: path.into(),
            text_field: "text".into(),
            id_field: "id".into(),
        }
    }

    pub fn with_text_field(mut self, field: impl Into<String>) -> Self {
        self.text_field = field.into();
        self
    }

    /// Parses `name=path[@field]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("dataset source `{spec}` is not name=path[@field]")))?;
        if name.is_empty() {
            return Err(Error::domain(format!("dataset source `{spec}` has an empty name")));
        }
        Ok(match rest.rsplit_once('@') {
            Some((path, field)) if !field.is_empty() => {
                Self::new(name, path).with_text_field(field)
            }
            _ => Self::new(name, rest),
        })
    }

    /// Loads `(raw id, text)` rows. Rows without an id get their 1-based line number.
    fn load(&self) -> Result<Vec<(String, String)>> {
        let path = &self.path;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let text = value
                .get(&self.text_field)
                .and_then(|v| v.as_str())
                .ok_or_else(|| parse_err(format!("missing string field `{}`", self.text_field)))?;
            let id = match value.get(&self.id_field) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                _ => (i + 1).to_string(),
            };
            rows.push((id, text.to_string()));
        }
        Ok(rows)
    }
}

/// Samples `per_dataset` prompts without replacement from every source.
///
/// Each dataset draws from its own stream derived from `seed` and the dataset
/// name, so adding a dataset leaves the others' samples unchanged. Prompt ids
/// are namespaced as `dataset:raw_id`.
pub fn sample_prompts(sources: &[DatasetSource], per_dataset: usize, seed: u64) -> Result<PromptSet> {
    if per_dataset == 0 {
        return Err(Error::domain("per_dataset must be at least 1"));
    }
    if sources.is_empty() {
        return Err(Error::domain("at least one dataset source is required"));
    }
    let mut prompts = Vec::with_capacity(per_dataset * sources.len());
    for source in sources {
        let rows = source.load()?;
        if rows.len() < per_dataset {
            return Err(Error::domain(format!(
                "dataset `{}` has {} rows, fewer than the {per_dataset} requested",
                source.name,
                rows.len()
            )));
        }
        let mut r = rng(derive_seed(seed, &source.name));
        for i in index::sample(&mut r, rows.len(), per_dataset) {
            let (id, text) = &rows[i];
            prompts.push(Prompt {
                id: format!("{}:{id}", source.name),
                dataset: source.name.clone(),
                text: text.clone(),
            });
        }
    }
    PromptSet::new(prompts, Some(seed))
}
