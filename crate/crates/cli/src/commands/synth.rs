use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Subcommand};
use llm_dna::analysis::write_pairs;
use llm_dna::routing::write_examples;
use llm_dna::synth::{
    distortion_experiment, relation_fixture, routing_cluster_fixture, spawn_mock_endpoint, MockScript,
    SyntheticFamilySpec,
};

use super::path_str;
use crate::config::Settings;
use crate::output::Report;

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Random-projection distortion over many seeds
    Distortion(DistortionArgs),
    /// Serve a scripted OpenAI-compatible endpoint until interrupted
    Mock(MockArgs),
    /// Write a DNA store of synthetic model families with labeled pairs
    Families(FamiliesArgs),
    /// Write a DNA store and train/test data for routing
    Routing(RoutingArgs),
}

#[derive(Args, Debug)]
pub struct DistortionArgs {
    /// Number of representations
    #[arg(long, default_value_t = 64)]
    k: usize,
    /// Source dimension D
    #[arg(long, default_value_t = 4096)]
    dim: usize,
    /// Relative distortion
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Number of projection seeds
    #[arg(long, default_value_t = 20)]
    seeds: usize,
}

#[derive(Args, Debug)]
pub struct MockArgs {
    /// Script file (JSON)
    #[arg(long)]
    script: Option<PathBuf>,
    /// Port to bind; 0 picks a free one
    #[arg(long, default_value_t = 0)]
    port: u16,
}

#[derive(Args, Debug)]
pub struct FamiliesArgs {
    #[arg(long, default_value_t = 10)]
    families: usize,
    #[arg(long, default_value_t = 8)]
    per_family: usize,
    /// Representation dimension
    #[arg(long, default_value_t = 256)]
    dim: usize,
    /// DNA dimension
    #[arg(long, default_value_t = 128)]
    dna_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    centroid_scale: f64,
    #[arg(long, default_value_t = 0.1)]
    within_noise: f64,
    /// Output directory: dna/, pairs.csv and families.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RoutingArgs {
    #[arg(long, default_value_t = 5)]
    models: usize,
    /// Queries per model cluster
    #[arg(long, default_value_t = 100)]
    per_cluster: usize,
    #[arg(long, default_value_t = 16)]
    query_dim: usize,
    #[arg(long, default_value_t = 32)]
    dna_dim: usize,
    /// Output directory: dna/, train.jsonl and test.jsonl (80:20)
    #[arg(long)]
    out: PathBuf,
}

pub fn run(settings: &Settings, cmd: SynthCommand) -> anyhow::Result<()> {
    match cmd {
        SynthCommand::Distortion(a) => distortion(settings, a),
        SynthCommand::Mock(a) => mock(settings, a),
        SynthCommand::Families(a) => families(settings, a),
        SynthCommand::Routing(a) => routing(settings, a),
    }
}

fn distortion(settings: &Settings, a: DistortionArgs) -> anyhow::Result<()> {
    let exp = distortion_experiment(a.k, a.dim, a.eps, a.seeds, settings.seed)?;
    let mut report = Report::new("synth distortion", settings);
    report
        .config("k", a.k)
        .config("dim", a.dim)
        .config("eps", a.eps)
        .config("seeds", a.seeds);
    report.result_fields(&exp)?;
    report.emit(settings.format);
    Ok(())
}

fn mock(settings: &Settings, a: MockArgs) -> anyhow::Result<()> {
    let script = match &a.script {
        Some(p) => MockScript::load(p)?,
        None => MockScript::default(),
    };
    let server = spawn_mock_endpoint(script, a.port)?;
    let mut report = Report::new("synth mock", settings);
    report
        .config("script", a.script.as_deref().map(path_str))
        .config("port", a.port);
    report.result("base_url", server.base_url());
    report.emit(settings.format);
    std::io::stdout().flush()?;
    server.join();
    Ok(())
}

fn families(settings: &Settings, a: FamiliesArgs) -> anyhow::Result<()> {
    let spec = SyntheticFamilySpec {
        seed: settings.seed,
        n_families: a.families,
        per_family: a.per_family,
        dim: a.dim,
        centroid_scale: a.centroid_scale,
        within_noise: a.within_noise,
        separable: false,
    };
    let fx = relation_fixture(&spec, a.dna_dim)?;
    std::fs::create_dir_all(&a.out).with_context(|| path_str(&a.out))?;
    fx.store.save(a.out.join("dna"))?;
    write_pairs(a.out.join("pairs.csv"), &fx.pairs)?;
    let mut csv = String::from("model_id,family\n");
    for (m, f) in &fx.families {
        csv.push_str(&format!("{m},{f}\n"));
    }
    let fam_path = a.out.join("families.csv");
    std::fs::write(&fam_path, csv).with_context(|| path_str(&fam_path))?;

    let mut report = Report::new("synth families", settings);
    report.config("spec", serde_json::to_value(&spec)?).config("dna_dim", a.dna_dim).config("out", path_str(&a.out));
    report
        .result("models", fx.store.len())
        .result("pairs", fx.pairs.len())
        .result("fingerprint", fx.store.fingerprint());
    report.emit(settings.format);
    Ok(())
}

fn routing(settings: &Settings, a: RoutingArgs) -> anyhow::Result<()> {
    let (store, examples) = routing_cluster_fixture(a.models, a.per_cluster, a.query_dim, a.dna_dim, settings.seed)?;
    let n_train = examples.len() * 4 / 5;
    std::fs::create_dir_all(&a.out).with_context(|| path_str(&a.out))?;
    store.save(a.out.join("dna"))?;
    write_examples(a.out.join("train.jsonl"), &examples[..n_train])?;
    write_examples(a.out.join("test.jsonl"), &examples[n_train..])?;

    let mut report = Report::new("synth routing", settings);
    report
        .config("models", a.models)
        .config("per_cluster", a.per_cluster)
        .config("query_dim", a.query_dim)
        .config("dna_dim", a.dna_dim)
        .config("out", path_str(&a.out));
    report
        .result("train", n_train)
        .result("test", examples.len() - n_train)
        .result("fingerprint", store.fingerprint());
    report.emit(settings.format);
    Ok(())
}
