//! `dna`: extract behavioral DNA from text-generation models and analyze it.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Settings;
use output::Format;

#[derive(Parser, Debug)]
#[command(name = "dna", version, about = "Behavioral DNA for text-generation models")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    /// Seed for every random choice of the run
    #[arg(long, global = true, env = "DNA_SEED")]
    seed: Option<u64>,
    /// Response and embedding cache directory
    #[arg(long, global = true, env = "DNA_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    /// error, warn, info, debug or trace
    #[arg(long, global = true, env = "DNA_LOG_LEVEL")]
    log_level: Option<String>,
    /// Output format
    #[arg(long, global = true, value_enum, env = "DNA_FORMAT")]
    format: Option<Format>,
    /// TOML file with defaults; flags and environment take precedence
    #[arg(long, global = true, env = "DNA_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Projection dimension and prompt count for given guarantees
    Plan(commands::plan::PlanArgs),
    /// Sample a prompt set from JSONL datasets
    SamplePrompts(commands::extract::SampleArgs),
    /// Extract DNA for every model in a roster
    Extract(commands::extract::ExtractArgs),
    /// Pairwise DNA distance matrix as CSV
    Distances(commands::analyze::DistancesArgs),
    /// Mantel permutation test between two distance matrices
    Mantel(commands::analyze::MantelArgs),
    /// Relation detection between pairs of models
    #[command(subcommand)]
    Relate(commands::analyze::RelateCommand),
    /// Neighbor-joining tree, midpoint rooted, as Newick
    Tree(commands::tree::TreeArgs),
    /// Query routing over frozen DNAs
    #[command(subcommand)]
    Route(commands::route::RouteCommand),
    /// Synthetic experiments, fixtures and a mock endpoint
    #[command(subcommand)]
    Synth(commands::synth::SynthCommand),
}

/// A problem with how the command was invoked rather than with its data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let settings = match Settings::resolve(&cli.global) {
        Ok(s) => s,
        Err(e) => return fail(Format::Text, &e),
    };
    env_logger::Builder::new()
        .parse_filters(&settings.log_level)
        .format_timestamp(None)
        .init();
    let format = settings.format;
    let result = match cli.command {
        Command::Plan(a) => commands::plan::run(&settings, a),
        Command::SamplePrompts(a) => commands::extract::sample(&settings, a),
        Command::Extract(a) => commands::extract::run(&settings, a),
        Command::Distances(a) => commands::analyze::distances(&settings, a),
        Command::Mantel(a) => commands::analyze::mantel(&settings, a),
        Command::Relate(c) => commands::analyze::relate(&settings, c),
        Command::Tree(a) => commands::tree::run(&settings, a),
        Command::Route(c) => commands::route::run(&settings, c),
        Command::Synth(c) => commands::synth::run(&settings, c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(format, &e),
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut message = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !message.contains(&text) {
            if !message.is_empty() {
                message.push_str(": ");
            }
            message.push_str(&text);
        }
    }
    message
}

fn fail(format: Format, e: &anyhow::Error) -> ExitCode {
    let usage = e.downcast_ref::<UsageError>().is_some();
    let message = describe(e);
    if format == Format::Json {
        let kind = if usage { "usage" } else { "domain" };
        println!("{}", serde_json::json!({"error": {"kind": kind, "message": message}}));
    }
    eprintln!("error: {message}");
    ExitCode::from(if usage { 2 } else { 1 })
}
