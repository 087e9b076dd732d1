use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

/// Sampling parameters sent with every generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub max_length: u32,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_length: 1024,
            temperature: 0.7,
            top_p: 0.9,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_length == 0 {
            return Err(Error::domain("max_length must be positive"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::domain("temperature must be non-negative"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::domain("top_p must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    fn canonical(&self) -> String {
        format!(
            "max_length={};temperature={:016x};top_p={:016x}",
            self.max_length,
            self.temperature.to_bits(),
            self.top_p.to_bits()
        )
    }
}

/// An OpenAI-compatible model (or embedder) endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEndpoint {
    pub model_id: String,
    /// Base URL up to and including the API version, e.g. `http://host:8000/v1`.
    pub base_url: String,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
    pub uses_chat_template: bool,
    pub gen_config: GenConfig,
}

impl ModelEndpoint {
    pub fn new(model_id: impl Into<String>, base_url: impl Into<String>) -> Result<Self> {
        let ep = Self {
            model_id: model_id.into(),
            base_url: base_url.into(),
            api_key_env: None,
            uses_chat_template: true,
            gen_config: GenConfig::default(),
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn completion(mut self) -> Self {
        self.uses_chat_template = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() {
            return Err(Error::domain("model_id must not be empty"));
        }
        let url = url::Url::parse(&self.base_url)
            .map_err(|e| Error::domain(format!("invalid base_url `{}`: {e}", self.base_url)))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(Error::domain(format!(
                "base_url `{}` must use http or https",
                self.base_url
            )));
        }
        self.gen_config.validate()
    }

    /// Cache key component: the generation parameters plus the request style,
    /// since chat and raw completion produce different text.
    pub fn config_hash(&self) -> String {
        let mode = if self.uses_chat_template { "chat" } else { "completion" };
        sha256_hex(format!("{};mode={mode}", self.gen_config.canonical()).as_bytes())
    }

    pub fn url(&self, route: &str) -> String {
        format!("{}/{route}", self.base_url.trim_end_matches('/'))
    }

    /// Resolves the API key from the environment. Keys are never persisted.
    pub fn api_key(&self) -> Result<Option<String>> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                Error::domain(format!(
                    "environment variable `{var}` (API key for `{}`) is not set",
                    self.model_id
                ))
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RosterEntry {
    model_id: String,
    base_url: String,
    #[serde(default)]
    api_key_env: Option<String>,
    #[serde(default = "default_true")]
    uses_chat_template: bool,
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    top_p: Option<f64>,
    #[serde(default)]
    max_length: Option<u32>,
}

fn default_true() -> bool {
    true
}

impl RosterEntry {
    fn into_endpoint(self) -> Result<ModelEndpoint> {
        let defaults = GenConfig::default();
        let ep = ModelEndpoint {
            model_id: self.model_id,
            base_url: self.base_url,
            api_key_env: self.api_key_env,
            uses_chat_template: self.uses_chat_template,
            gen_config: GenConfig {
                max_length: self.max_length.unwrap_or(defaults.max_length),
                temperature: self.temperature.unwrap_or(defaults.temperature),
                top_p: self.top_p.unwrap_or(defaults.top_p),
            },
        };
        ep.validate()?;
        Ok(ep)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RosterFile {
    #[serde(default)]
    models: Vec<RosterEntry>,
    #[serde(default)]
    embedder: Option<RosterEntry>,
}

/// The models to extract plus, optionally, the embedding endpoint.
///
/// ```toml
/// [embedder]
/// model_id = "Qwen/Qwen3-Embedding-8B"
/// base_url = "http://localhost:8001/v1"
///
/// [[models]]
/// model_id = "meta-llama/Llama-3.1-8B-Instruct"
/// base_url = "http://localhost:8000/v1"
/// api_key_env = "LLAMA_KEY"
/// uses_chat_template = true
/// temperature = 0.7
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    pub models: Vec<ModelEndpoint>,
    pub embedder: Option<ModelEndpoint>,
}

impl Roster {
    pub fn parse(text: &str) -> Result<Self> {
        let file: RosterFile =
            toml::from_str(text).map_err(|e| Error::domain(format!("invalid roster: {e}")))?;
        let models = file
            .models
            .into_iter()
            .map(RosterEntry::into_endpoint)
            .collect::<Result<Vec<_>>>()?;
        let mut seen = std::collections::HashSet::new();
        for m in &models {
            if !seen.insert(m.model_id.as_str()) {
                return Err(Error::domain(format!(
                    "model_id `{}` appears twice in the roster",
                    m.model_id
                )));
            }
        }
        let embedder = file.embedder.map(RosterEntry::into_endpoint).transpose()?;
        Ok(Self { models, embedder })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let g = GenConfig::default();
        assert_eq!((g.max_length, g.temperature, g.top_p), (1024, 0.7, 0.9));
    }

    #[test]
    fn config_hash_changes_with_parameters() {
        let a = GenConfig::default();
        let mut b = a.clone();
        b.temperature = 0.0;
        assert_ne!(a.config_hash(), b.config_hash());
        let ep = ModelEndpoint::new("m", "http://localhost:1/v1").unwrap();
        assert_ne!(ep.config_hash(), ep.clone().completion().config_hash());
    }

    #[test]
    fn endpoint_validation() {
        assert!(ModelEndpoint::new("m", "not a url").is_err());
        assert!(ModelEndpoint::new("m", "ftp://host/v1").is_err());
        assert!(ModelEndpoint::new("", "http://host/v1").is_err());
        let ep = ModelEndpoint::new("m", "http://host:8000/v1/").unwrap();
        assert_eq!(ep.url("chat/completions"), "http://host:8000/v1/chat/completions");
    }

    #[test]
    fn roster_parsing() {
        let roster = Roster::parse(
            r#"
            [embedder]
            model_id = "emb"
            base_url = "http://localhost:9/v1"

            [[models]]
            model_id = "a"
            base_url = "http://localhost:8/v1"
            api_key_env = "A_KEY"
            temperature = 0.0

            [[models]]
            model_id = "b"
            base_url = "http://localhost:8/v1"
            uses_chat_template = false
            max_length = 64
            "#,
        )
        .unwrap();
        assert_eq!(roster.models.len(), 2);
        assert_eq!(roster.models[0].gen_config.temperature, 0.0);
        assert_eq!(roster.models[0].gen_config.top_p, 0.9);
        assert!(!roster.models[1].uses_chat_template);
        assert_eq!(roster.models[1].gen_config.max_length, 64);
        assert_eq!(roster.embedder.unwrap().model_id, "emb");
    }

    #[test]
    fn roster_rejects_duplicates_and_bad_values() {
        let dup = r#"
            [[models]]
            model_id = "a"
            base_url = "http://h/v1"
            [[models]]
            model_id = "a"
            base_url = "http://h/v1"
        "#;
        assert!(Roster::parse(dup).is_err());
        let bad = r#"
            [[models]]
            model_id = "a"
            base_url = "http://h/v1"
            top_p = 1.5
        "#;
        assert!(Roster::parse(bad).is_err());
    }

    #[test]
    fn api_key_from_env_only() {
        let mut ep = ModelEndpoint::new("m", "http://h/v1").unwrap();
        assert_eq!(ep.api_key().unwrap(), None);
        ep.api_key_env = Some("LLM_DNA_TEST_SURELY_UNSET_VAR".into());
        assert!(ep.api_key().is_err());
    }
}
