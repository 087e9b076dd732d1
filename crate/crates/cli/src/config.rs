//! Resolution of global settings and per-command defaults.
//!
//! Precedence is flag, then environment variable (both handled by clap),
//! then the TOML config file, then the built-in default.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::output::Format;
use crate::GlobalArgs;

pub const DEFAULT_CACHE_DIR: &str = ".dna-cache";
pub const DEFAULT_LOG_LEVEL: &str = "warn";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub log_level: Option<String>,
    pub format: Option<Format>,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub relate: RelateSection,
    #[serde(default)]
    pub route: RouteSection,
    #[serde(default)]
    pub mantel: MantelSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub embedder_id: Option<String>,
    pub embedder_url: Option<String>,
    pub parallel_models: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelateSection {
    pub c: Option<f64>,
    pub gamma: Option<String>,
    pub tol: Option<f64>,
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSection {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub l2: Option<f64>,
    pub batch_size: Option<usize>,
    pub init_std: Option<f64>,
    pub scoring: Option<String>,
    pub use_bias: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MantelSection {
    pub permutations: Option<usize>,
}

#[derive(Debug)]
pub struct Settings {
    pub seed: u64,
    pub cache_dir: PathBuf,
    pub log_level: String,
    pub format: Format,
    pub config_path: Option<PathBuf>,
    pub file: ConfigFile,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &args.config {
            Some(path) => load_config(path)?,
            None => ConfigFile::default(),
        };
        Ok(Self {
            seed: args.seed.or(file.seed).unwrap_or(0),
            cache_dir: args
                .cache_dir
                .clone()
                .or_else(|| file.cache_dir.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
            log_level: args
                .log_level
                .clone()
                .or_else(|| file.log_level.clone())
                .unwrap_or_else(|| DEFAULT_LOG_LEVEL.to_string()),
            format: args.format.or(file.format).unwrap_or(Format::Text),
            config_path: args.config.clone(),
            file,
        })
    }

    /// The global part of the reproducibility header.
    pub fn echo(&self) -> Value {
        json!({
            "seed": self.seed,
            "cache_dir": self.cache_dir.display().to_string(),
            "log_level": self.log_level,
            "format": self.format.as_str(),
            "config_file": self.config_path.as_ref().map(|p| p.display().to_string()),
        })
    }
}

fn load_config(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

/// First present value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
