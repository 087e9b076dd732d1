use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use chrono::{DateTime, TimeZone, Utc};
use clap::Args;
use llm_dna::dna::plan_from_constants;
use llm_dna::extraction::{extract_fleet, DnaStore, FleetOptions, ProjectionPlan};
use llm_dna::model_io::{sample_prompts, DatasetSource, HttpClient, ModelEndpoint, ModelIo, PromptSet, RetryPolicy, Roster};
use serde_json::json;

use super::{load_store, path_str, usage};
use crate::config::{pick, Settings};
use crate::output::Report;

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Dataset as name=path.jsonl[@text_field]; repeat for several
    #[arg(long = "source", required = true)]
    sources: Vec<String>,
    /// Prompts drawn from each dataset
    #[arg(long, default_value_t = 100)]
    per_dataset: usize,
    /// Output prompt set (JSONL)
    #[arg(long)]
    out: PathBuf,
}

pub fn sample(settings: &Settings, a: SampleArgs) -> anyhow::Result<()> {
    let sources = a
        .sources
        .iter()
        .map(|s| DatasetSource::parse(s).map_err(|e| usage(e.to_string())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let set = sample_prompts(&sources, a.per_dataset, settings.seed)?;
    set.save_jsonl(&a.out)?;
    let mut report = Report::new("sample-prompts", settings);
    report
        .config("sources", a.sources.clone())
        .config("per_dataset", a.per_dataset)
        .config("out", path_str(&a.out));
    report.result("prompts", set.len()).result("prompt_set_hash", set.hash());
    report.emit(settings.format);
    Ok(())
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// Model roster (TOML)
    #[arg(long)]
    roster: PathBuf,
    /// Prompt set (JSONL, as written by sample-prompts)
    #[arg(long)]
    prompts: PathBuf,
    /// Embedding model id; overrides the roster's [embedder]
    #[arg(long)]
    embedder_id: Option<String>,
    /// Embedding endpoint base URL; overrides the roster's [embedder]
    #[arg(long)]
    embedder_url: Option<String>,
    /// DNA dimension L
    #[arg(long)]
    dim: Option<usize>,
    /// Scale applied after projection
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    alpha: Option<f64>,
    /// Lower preservation constant; with --c2 sets alpha = (c1 + c2) / 2
    #[arg(long, requires = "c2")]
    c1: Option<f64>,
    /// Upper preservation constant
    #[arg(long, requires = "c1")]
    c2: Option<f64>,
    /// Models extracted concurrently
    #[arg(long)]
    parallel_models: Option<usize>,
    /// Maximum concurrent HTTP requests
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Attempts per request, including the first
    #[arg(long)]
    retries: Option<u32>,
    /// Per-request timeout in seconds
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Output DNA store directory; existing stores are extended
    #[arg(long)]
    out: PathBuf,
}

/// `SOURCE_DATE_EPOCH` pins record timestamps for reproducible stores.
fn created_at() -> anyhow::Result<Option<DateTime<Utc>>> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
            let at = Utc
                .timestamp_opt(secs, 0)
                .single()
                .context("SOURCE_DATE_EPOCH is out of range")?;
            Ok(Some(at))
        }
        Err(_) => Ok(None),
    }
}

pub fn run(settings: &Settings, a: ExtractArgs) -> anyhow::Result<()> {
    let f = &settings.file.extract;
    let roster = Roster::load(&a.roster)?;
    let prompts = PromptSet::load_jsonl(&a.prompts)?;
    let embedder_id = a.embedder_id.clone().or_else(|| f.embedder_id.clone());
    let embedder_url = a.embedder_url.clone().or_else(|| f.embedder_url.clone());
    let embedder = match (roster.embedder.clone(), embedder_id, embedder_url) {
        (_, Some(id), Some(url)) => ModelEndpoint::new(id, url)?,
        (Some(mut e), id, url) => {
            if let Some(id) = id {
                e.model_id = id;
            }
            if let Some(url) = url {
                e.base_url = url;
            }
            e.validate()?;
            e
        }
        (None, _, _) => {
            return Err(usage(
                "no embedder: pass --embedder-id and --embedder-url or add [embedder] to the roster",
            ))
        }
    };
    let dim = pick(a.dim, f.dim, 128);
    let alpha = match (a.c1, a.c2) {
        (Some(c1), Some(c2)) => plan_from_constants(c1, c2, roster.models.len().max(2))?.alpha,
        _ => pick(a.alpha, f.alpha, 1.0),
    };
    let parallel_models = pick(a.parallel_models, f.parallel_models, 2);
    let max_in_flight = pick(a.max_in_flight, f.max_in_flight, 8);
    let attempts = pick(a.retries, f.retries, RetryPolicy::default().max_attempts);
    let timeout = pick(a.timeout_secs, f.timeout_secs, 120);

    let retry = RetryPolicy {
        max_attempts: attempts,
        ..RetryPolicy::default()
    };
    let client = HttpClient::new(retry, Duration::from_secs(timeout));
    let io = ModelIo::new(&settings.cache_dir, client, max_in_flight)?;
    let existing = if DnaStore::exists(&a.out) {
        Some(load_store(&a.out)?)
    } else {
        None
    };
    let options = FleetOptions {
        alpha,
        parallel_models,
        created_at: created_at()?,
    };
    let plan = ProjectionPlan::Seeded {
        seed: settings.seed,
        dna_dim: dim,
    };
    let fleet = extract_fleet(&io, &roster.models, &prompts, &embedder, plan, &options, existing, Some(&a.out))?;

    let mut report = Report::new("extract", settings);
    report
        .config("roster", path_str(&a.roster))
        .config("prompts", path_str(&a.prompts))
        .config("prompt_set_hash", prompts.hash())
        .config("embedder_id", embedder.model_id.clone())
        .config("embedder_url", embedder.base_url.clone())
        .config("dim", dim)
        .config("alpha", alpha)
        .config("parallel_models", parallel_models)
        .config("max_in_flight", max_in_flight)
        .config("retries", attempts)
        .config("timeout_secs", timeout)
        .config("out", path_str(&a.out));
    report
        .result("added", fleet.added.clone())
        .result("skipped", fleet.skipped.clone())
        .result("failed", json!(fleet.failures))
        .result("store_size", fleet.store.len())
        .result("fingerprint", fleet.store.fingerprint());
    report.emit(settings.format);
    Ok(())
}
