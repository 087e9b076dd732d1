use std::path::PathBuf;

use clap::{Args, Subcommand};
use llm_dna::routing::{
    expected_random_accuracy, random_router_accuracy, read_examples, routing_accuracy, single_best_baseline,
    train_router, RouterHyperparams, RouterModel, Scoring,
};

use super::{load_store, path_str, usage};
use crate::config::{pick, Settings};
use crate::output::Report;

#[derive(Subcommand, Debug)]
pub enum RouteCommand {
    /// Train a router over the frozen DNAs of a store
    Train(RouteTrainArgs),
    /// Routing accuracy against single-best and random baselines
    Eval(RouteEvalArgs),
}

#[derive(Args, Debug)]
pub struct RouteTrainArgs {
    /// DNA store directory
    #[arg(long)]
    dna: PathBuf,
    /// Training examples (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Where to save the router (JSON)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// L2 penalty on the projection matrix
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Standard deviation of the initial weights
    #[arg(long)]
    init_std: Option<f64>,
    /// `dot` or `cosine`
    #[arg(long)]
    scoring: Option<String>,
    /// Drop the per-model bias terms
    #[arg(long)]
    no_bias: bool,
}

#[derive(Args, Debug)]
pub struct RouteEvalArgs {
    /// Saved router
    #[arg(long)]
    router: PathBuf,
    /// Evaluation examples (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Training examples, used to pick the single-best model
    #[arg(long)]
    train: Option<PathBuf>,
}

pub fn run(settings: &Settings, cmd: RouteCommand) -> anyhow::Result<()> {
    match cmd {
        RouteCommand::Train(a) => train(settings, a),
        RouteCommand::Eval(a) => eval(settings, a),
    }
}

fn parse_scoring(s: &str) -> anyhow::Result<Scoring> {
    match s {
        "dot" => Ok(Scoring::Dot),
        "cosine" => Ok(Scoring::Cosine),
        other => Err(usage(format!("scoring must be `dot` or `cosine`, got `{other}`"))),
    }
}

fn train(settings: &Settings, a: RouteTrainArgs) -> anyhow::Result<()> {
    let f = &settings.file.route;
    let d = RouterHyperparams::default();
    let scoring_text = pick(a.scoring.clone(), f.scoring.clone(), "dot".to_string());
    let hp = RouterHyperparams {
        learning_rate: pick(a.lr, f.learning_rate, d.learning_rate),
        epochs: pick(a.epochs, f.epochs, d.epochs),
        l2: pick(a.l2, f.l2, d.l2),
        batch_size: pick(a.batch_size, f.batch_size, d.batch_size),
        seed: settings.seed,
        init_std: pick(a.init_std, f.init_std, d.init_std),
        use_bias: if a.no_bias { false } else { f.use_bias.unwrap_or(d.use_bias) },
        scoring: parse_scoring(&scoring_text)?,
    };
    let store = load_store(&a.dna)?;
    let examples = read_examples(&a.data)?;
    let trained = train_router(&store, &examples, &hp)?;
    trained.router.save(&a.out)?;
    for w in &trained.warnings {
        log::warn!("{w}");
    }

    let mut report = Report::new("route train", settings);
    report
        .config("dna", path_str(&a.dna))
        .config("data", path_str(&a.data))
        .config("out", path_str(&a.out))
        .config("hyperparams", serde_json::to_value(&hp)?);
    report
        .result("examples", examples.len())
        .result("models", trained.router.dna_index.len())
        .result("final_loss", trained.loss_history.last().copied())
        .result("train_accuracy", routing_accuracy(&trained.router, &examples)?)
        .result("warnings", trained.warnings.clone());
    report.emit(settings.format);
    Ok(())
}

fn eval(settings: &Settings, a: RouteEvalArgs) -> anyhow::Result<()> {
    let router = RouterModel::load(&a.router)?;
    let test = read_examples(&a.data)?;
    let train = match &a.train {
        Some(p) => read_examples(p)?,
        None => test.clone(),
    };
    let models: Vec<String> = router.models().map(String::from).collect();
    let best = single_best_baseline(&train, &test)?;

    let mut report = Report::new("route eval", settings);
    report
        .config("router", path_str(&a.router))
        .config("data", path_str(&a.data))
        .config("train", a.train.as_deref().map(path_str))
        .config("single_best_selected_on", if a.train.is_some() { "train" } else { "eval" });
    report
        .result("examples", test.len())
        .result("accuracy", routing_accuracy(&router, &test)?)
        .result("single_best", serde_json::to_value(&best)?)
        .result("random", random_router_accuracy(&test, &models, settings.seed)?)
        .result("random_expected", expected_random_accuracy(&test, &models)?);
    report.emit(settings.format);
    Ok(())
}
