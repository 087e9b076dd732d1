use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::dna::{DnaRecord, ProjectionSpec};
use crate::error::{Error, Result};
use crate::util::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "dna.jsonl";

/// Shared provenance of every record in a store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub projection: ProjectionSpec,
    pub alpha: f64,
    pub embedder_id: String,
    pub prompt_set_hash: String,
    pub version: String,
}

impl Manifest {
    pub fn new(
        projection: ProjectionSpec,
        alpha: f64,
        embedder_id: impl Into<String>,
        prompt_set_hash: impl Into<String>,
    ) -> Self {
        Self {
            projection,
            alpha,
            embedder_id: embedder_id.into(),
            prompt_set_hash: prompt_set_hash.into(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Same projection, scale, embedder and prompt set; the tool version may differ.
    pub fn compatible_with(&self, other: &Manifest) -> bool {
        self.projection == other.projection
            && self.alpha == other.alpha
            && self.embedder_id == other.embedder_id
            && self.prompt_set_hash == other.prompt_set_hash
    }

    fn check_record(&self, r: &DnaRecord) -> Result<()> {
        if r.projection != self.projection
            || r.alpha != self.alpha
            || r.embedder_id != self.embedder_id
            || r.prompt_set_hash != self.prompt_set_hash
        {
            return Err(Error::provenance(format!(
                "record `{}` does not match the store manifest",
                r.model_id
            )));
        }
        if r.vector.len() != self.projection.dna_dim {
            return Err(Error::DimensionMismatch {
                context: "stored DNA",
                expected: self.projection.dna_dim,
                actual: r.vector.len(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    model_id: String,
    vector: Vec<f32>,
    created_at: DateTime<Utc>,
}

/// An append-only collection of DNA records sharing one manifest.
///
/// Vectors are persisted as `f32`; [`DnaStore::insert`] rounds them on the way
/// in so the in-memory store always equals what is on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DnaStore {
    manifest: Manifest,
    records: IndexMap<String, DnaRecord>,
}

impl DnaStore {
    pub fn new(manifest: Manifest) -> Self {
        Self {
            manifest,
            records: IndexMap::new(),
        }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, model_id: &str) -> Option<&DnaRecord> {
        self.records.get(model_id)
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.records.contains_key(model_id)
    }

    /// Records in insertion order.
    pub fn records(&self) -> impl Iterator<Item = &DnaRecord> {
        self.records.values()
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    /// Adds a record after validating it against the manifest. Duplicate
    /// model ids are rejected; existing records are never replaced.
    pub fn insert(&mut self, mut record: DnaRecord) -> Result<&DnaRecord> {
        self.manifest.check_record(&record)?;
        if self.records.contains_key(&record.model_id) {
            return Err(Error::domain(format!(
                "model `{}` is already in the store",
                record.model_id
            )));
        }
        for v in record.vector.iter_mut() {
            *v = *v as f32 as f64;
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("DNA of `{}` after f32 rounding", record.model_id)));
        }
        let id = record.model_id.clone();
        self.records.insert(id.clone(), record);
        Ok(&self.records[&id])
    }

    /// Adds every record of `other`; both stores must share provenance.
    pub fn merge(&mut self, other: &DnaStore) -> Result<()> {
        if !self.manifest.compatible_with(&other.manifest) {
            return Err(Error::provenance("cannot merge stores with different manifests"));
        }
        for r in other.records() {
            if !self.contains(&r.model_id) {
                self.insert(r.clone())?;
            }
        }
        Ok(())
    }

    /// Digest of the manifest and all records, used to tie derived artifacts to a store.
    pub fn fingerprint(&self) -> String {
        let mut buf = serde_json::to_vec(&self.manifest.projection).unwrap_or_default();
        buf.extend(format!("|{}|{}|{}|", self.manifest.alpha, self.manifest.embedder_id, self.manifest.prompt_set_hash).bytes());
        for r in self.records() {
            buf.extend(record_line(r).unwrap_or_default());
        }
        sha256_hex(&buf)
    }

    /// Writes `manifest.json` and `dna.jsonl` into `dir`, replacing any previous contents.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_manifest(dir, &self.manifest)?;
        let mut body = Vec::new();
        for r in self.records() {
            body.extend(record_line(r)?);
        }
        let path = dir.join(RECORDS_FILE);
        let tmp = dir.join(format!("{RECORDS_FILE}.tmp"));
        fs::write(&tmp, &body).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Inserts `record` and appends it to the store at `dir` without touching
    /// existing lines. The directory must already hold this store's manifest.
    pub fn append(&mut self, dir: impl AsRef<Path>, record: DnaRecord) -> Result<()> {
        let dir = dir.as_ref();
        let on_disk = read_manifest(dir)?;
        if !on_disk.compatible_with(&self.manifest) {
            return Err(Error::provenance(format!(
                "store at {} has a different manifest",
                dir.display()
            )));
        }
        let line = record_line(self.insert(record)?)?;
        let path = dir.join(RECORDS_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.write_all(&line)
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = read_manifest(dir)?;
        let mut store = DnaStore::new(manifest);
        let path = dir.join(RECORDS_FILE);
        if !path.exists() {
            return Ok(store);
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            let parse_err = |message: String| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let parsed: RecordLine =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let m = &store.manifest;
            let record = DnaRecord::new(
                parsed.model_id,
                parsed.vector.into_iter().map(f64::from).collect(),
                m.projection.clone(),
                m.alpha,
                m.embedder_id.clone(),
                m.prompt_set_hash.clone(),
            )
            .map_err(|e| parse_err(e.to_string()))?
            .with_created_at(parsed.created_at);
            store.insert(record).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(store)
    }

    /// Whether `dir` already holds a store.
    pub fn exists(dir: impl AsRef<Path>) -> bool {
        dir.as_ref().join(MANIFEST_FILE).is_file()
    }
}

fn record_line(r: &DnaRecord) -> Result<Vec<u8>> {
    let line = RecordLine {
        model_id: r.model_id.clone(),
        vector: r.vector.iter().map(|v| *v as f32).collect(),
        created_at: r.created_at,
    };
    let mut bytes = serde_json::to_vec(&line)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub(crate) fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}
