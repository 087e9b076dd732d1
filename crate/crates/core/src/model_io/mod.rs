//! Prompt sampling and cache-first access to generation and embedding endpoints.
//!
//! All network traffic in the crate goes through [`ModelIo`]. Every call
//! consults the on-disk caches first, so replaying a run from a warm cache
//! needs no network at all.

mod cache;
mod client;
mod endpoint;
mod prompts;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cache::{cache_file_name, EmbeddingCache, ResponseCache};
pub use client::{parse_embedding, parse_generation, HttpClient, RetryPolicy};
pub use endpoint::{GenConfig, ModelEndpoint, Roster};
pub use prompts::{prompt_set_hash, sample_prompts, DatasetSource, Prompt, PromptSet};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub model_id: String,
    pub prompt_id: String,
    /// May be empty: an empty reply is valid model behavior.
    pub text: String,
    pub config_hash: String,
}

impl ResponseRecord {
    pub fn source_key(&self) -> SourceKey {
        SourceKey {
            model_id: self.model_id.clone(),
            prompt_id: self.prompt_id.clone(),
            config_hash: self.config_hash.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceKey {
    pub model_id: String,
    pub prompt_id: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub embedder_id: String,
    pub source_key: SourceKey,
    pub values: Vec<f64>,
}

/// Cache key of an embedding: digest of the exact text embedded.
pub fn embedding_key(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

/// Cache-first gateway to model and embedder endpoints.
pub struct ModelIo {
    client: HttpClient,
    responses: ResponseCache,
    embeddings: EmbeddingCache,
    dims: Mutex<HashMap<String, usize>>,
    pool: rayon::ThreadPool,
    cache_dir: PathBuf,
}

impl ModelIo {
    /// `max_in_flight` bounds concurrent requests across all fan-outs.
    pub fn new(cache_dir: impl AsRef<Path>, client: HttpClient, max_in_flight: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(max_in_flight.max(1))
            .thread_name(|i| format!("dna-io-{i}"))
            .build()
            .map_err(|e| Error::domain(format!("cannot start request pool: {e}")))?;
        let cache_dir = cache_dir.as_ref().to_path_buf();
        Ok(Self {
            client,
            responses: ResponseCache::new(&cache_dir),
            embeddings: EmbeddingCache::new(&cache_dir),
            dims: Mutex::new(HashMap::new()),
            pool,
            cache_dir,
        })
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    pub fn response_cache(&self) -> &ResponseCache {
        &self.responses
    }

    pub fn embedding_cache(&self) -> &EmbeddingCache {
        &self.embeddings
    }

    /// Response of `endpoint` to `prompt`, from cache when available.
    pub fn generate_response(&self, endpoint: &ModelEndpoint, prompt: &Prompt) -> Result<ResponseRecord> {
        let config_hash = endpoint.config_hash();
        let text = match self.responses.get(&endpoint.model_id, &prompt.id, &config_hash)? {
            Some(text) => text,
            None => {
                let text = self.client.generate(endpoint, &prompt.text)?;
                self.responses
                    .put(&endpoint.model_id, &prompt.id, &config_hash, &text)?
            }
        };
        Ok(ResponseRecord {
            model_id: endpoint.model_id.clone(),
            prompt_id: prompt.id.clone(),
            text,
            config_hash,
        })
    }

    /// Embeds `text` (which may be empty) with `embedder`, enforcing one
    /// embedding dimension per embedder for the lifetime of the cache.
    pub fn embed_text(&self, embedder: &ModelEndpoint, key: SourceKey, text: &str) -> Result<EmbeddingVector> {
        let id = &embedder.model_id;
        let cache_key = embedding_key(text);
        let values = match self.embeddings.get(id, &cache_key)? {
            Some(v) => v,
            None => {
                let v = self.client.embed(embedder, text)?;
                self.check_dim(id, v.len())?;
                self.embeddings.put(id, &cache_key, v)?
            }
        };
        self.check_dim(id, values.len())?;
        Ok(EmbeddingVector {
            embedder_id: id.clone(),
            source_key: key,
            values,
        })
    }

    fn check_dim(&self, embedder_id: &str, len: usize) -> Result<()> {
        let mut dims = self.dims.lock().expect("dims lock poisoned");
        let expected = match dims.get(embedder_id) {
            Some(&d) => d,
            None => {
                let d = self.embeddings.known_dim(embedder_id)?.unwrap_or(len);
                dims.insert(embedder_id.to_string(), d);
                d
            }
        };
        if expected != len {
            return Err(Error::DimensionDrift {
                embedder: embedder_id.to_string(),
                expected,
                actual: len,
            });
        }
        Ok(())
    }

    /// Embedding dimension `p` learned so far for an embedder.
    pub fn embedding_dim(&self, embedder_id: &str) -> Option<usize> {
        self.dims.lock().expect("dims lock poisoned").get(embedder_id).copied()
    }

    /// Responses for every prompt, in prompt order, fetched with bounded parallelism.
    pub fn generate_all(&self, endpoint: &ModelEndpoint, prompts: &PromptSet) -> Result<Vec<ResponseRecord>> {
        self.pool.install(|| {
            prompts
                .prompts()
                .par_iter()
                .map(|p| self.generate_response(endpoint, p))
                .collect()
        })
    }

    /// Embeddings for a batch of responses, in input order.
    pub fn embed_all(&self, embedder: &ModelEndpoint, responses: &[ResponseRecord]) -> Result<Vec<EmbeddingVector>> {
        self.pool.install(|| {
            responses
                .par_iter()
                .map(|r| self.embed_text(embedder, r.source_key(), &r.text))
                .collect()
        })
    }
}
