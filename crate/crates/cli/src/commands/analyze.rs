use std::path::PathBuf;

use clap::{Args, Subcommand};
use llm_dna::analysis::{
    distance_matrix, evaluate_greedy, evaluate_random, mantel_test, read_pairs, stratified_split, DistanceMatrix, Gamma,
    RelationClassifier, SvmParams,
};
use llm_dna::phylo::{family_distance_matrix, read_family_map};
use llm_dna::util::derive_seed;
use serde_json::json;

use super::{load_store, path_str, usage};
use crate::config::{pick, Settings};
use crate::output::{Format, Report};

#[derive(Args, Debug)]
pub struct DistancesArgs {
    /// DNA store directory
    #[arg(long)]
    dna: PathBuf,
    /// Write the matrix here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of model_id,family; distances between family centroids
    #[arg(long)]
    group_by: Option<PathBuf>,
}

pub fn distances(settings: &Settings, a: DistancesArgs) -> anyhow::Result<()> {
    let store = load_store(&a.dna)?;
    let matrix = match &a.group_by {
        Some(path) => family_distance_matrix(&store, &read_family_map(path)?)?,
        None => distance_matrix(&store)?,
    };
    let mut report = Report::new("distances", settings);
    report.config("dna", path_str(&a.dna));
    if let Some(g) = &a.group_by {
        report.config("group_by", path_str(g)).config("aggregation", "centroid");
    }
    report.result("labels", matrix.labels().len());
    match &a.out {
        Some(out) => {
            std::fs::write(out, matrix.to_csv_string()?).map_err(|e| anyhow::anyhow!("{}: {e}", out.display()))?;
            report.config("out", path_str(out));
            report.emit(settings.format);
        }
        None if settings.format == Format::Json => {
            let rows: Vec<Vec<f64>> = (0..matrix.len()).map(|i| matrix.row(i).to_vec()).collect();
            report.result("names", matrix.labels().to_vec()).result("matrix", json!(rows));
            report.emit(settings.format);
        }
        None => {
            report.emit(settings.format);
            print!("{}", matrix.to_csv_string()?);
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct MantelArgs {
    /// First distance matrix (CSV)
    #[arg(long)]
    a: PathBuf,
    /// Second distance matrix (CSV)
    #[arg(long)]
    b: PathBuf,
    /// Number of permutations
    #[arg(long)]
    perms: Option<usize>,
}

pub fn mantel(settings: &Settings, a: MantelArgs) -> anyhow::Result<()> {
    let perms = pick(a.perms, settings.file.mantel.permutations, 9999);
    let da = DistanceMatrix::load_csv(&a.a)?;
    let db = DistanceMatrix::load_csv(&a.b)?;
    let res = mantel_test(&da, &db, perms, settings.seed)?;
    let mut report = Report::new("mantel", settings);
    report
        .config("a", path_str(&a.a))
        .config("b", path_str(&a.b))
        .config("perms", perms);
    report
        .result("r", res.r)
        .result("p_value", res.p_value)
        .result("pairs", res.pairs);
    report.emit(settings.format);
    Ok(())
}

#[derive(Subcommand, Debug)]
pub enum RelateCommand {
    /// Train the pair classifier and compare it with the baselines
    Train(RelateTrainArgs),
    /// Evaluate a saved classifier and the baselines on labeled pairs
    Eval(RelateEvalArgs),
}

#[derive(Args, Debug)]
pub struct RelateTrainArgs {
    /// DNA store directory
    #[arg(long)]
    dna: PathBuf,
    /// Labeled pairs CSV: model_a,model_b,org_a,org_b,label
    #[arg(long)]
    pairs: PathBuf,
    /// Soft-margin penalty
    #[arg(long)]
    c: Option<f64>,
    /// RBF width: `scale` or a positive number
    #[arg(long)]
    gamma: Option<String>,
    /// Stopping tolerance on the maximal KKT violation
    #[arg(long)]
    tol: Option<f64>,
    /// Fraction of pairs held out for evaluation (stratified)
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Where to save the classifier (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RelateEvalArgs {
    /// DNA store directory
    #[arg(long)]
    dna: PathBuf,
    /// Labeled pairs CSV
    #[arg(long)]
    pairs: PathBuf,
    /// Saved classifier
    #[arg(long)]
    model: PathBuf,
}

pub fn relate(settings: &Settings, cmd: RelateCommand) -> anyhow::Result<()> {
    match cmd {
        RelateCommand::Train(a) => relate_train(settings, a),
        RelateCommand::Eval(a) => relate_eval(settings, a),
    }
}

fn relate_train(settings: &Settings, a: RelateTrainArgs) -> anyhow::Result<()> {
    let f = &settings.file.relate;
    let c = pick(a.c, f.c, 1.0);
    let gamma_text = pick(a.gamma.clone(), f.gamma.clone(), "scale".to_string());
    let gamma = Gamma::parse(&gamma_text).map_err(|e| usage(e.to_string()))?;
    let tol = pick(a.tol, f.tol, 1e-3);
    let test_fraction = pick(a.test_fraction, f.test_fraction, 0.2);
    let params = SvmParams {
        c,
        gamma,
        tol,
        seed: derive_seed(settings.seed, "svm"),
        ..SvmParams::default()
    };
    let store = load_store(&a.dna)?;
    let pairs = read_pairs(&a.pairs)?;
    let (train, test) = stratified_split(&pairs, test_fraction, settings.seed)?;
    let clf = RelationClassifier::train(&store, &train, &params)?;
    clf.save(&a.out)?;

    let mut report = Report::new("relate train", settings);
    report
        .config("dna", path_str(&a.dna))
        .config("pairs", path_str(&a.pairs))
        .config("c", c)
        .config("gamma", gamma_text)
        .config("tol", tol)
        .config("test_fraction", test_fraction)
        .config("out", path_str(&a.out));
    report
        .result("train_pairs", train.len())
        .result("test_pairs", test.len())
        .result("support_vectors", clf.svm.support_vectors.len())
        .result("gamma", clf.svm.gamma)
        .result("iterations", clf.svm.iterations);
    let eval_set = if test.is_empty() { &train } else { &test };
    report.result("evaluated_on", if test.is_empty() { "train" } else { "test" });
    add_metrics(&mut report, &clf, &store, eval_set, settings.seed)?;
    report.emit(settings.format);
    Ok(())
}

fn relate_eval(settings: &Settings, a: RelateEvalArgs) -> anyhow::Result<()> {
    let store = load_store(&a.dna)?;
    let pairs = read_pairs(&a.pairs)?;
    let clf = RelationClassifier::load(&a.model)?;
    let mut report = Report::new("relate eval", settings);
    report
        .config("dna", path_str(&a.dna))
        .config("pairs", path_str(&a.pairs))
        .config("model", path_str(&a.model));
    report.result("pairs", pairs.len());
    add_metrics(&mut report, &clf, &store, &pairs, settings.seed)?;
    report.emit(settings.format);
    Ok(())
}

fn add_metrics(
    report: &mut Report,
    clf: &RelationClassifier,
    store: &llm_dna::extraction::DnaStore,
    pairs: &[llm_dna::analysis::RelationPair],
    seed: u64,
) -> anyhow::Result<()> {
    report
        .result("svm", serde_json::to_value(clf.evaluate(store, pairs)?)?)
        .result("greedy", serde_json::to_value(evaluate_greedy(pairs)?)?)
        .result("random", serde_json::to_value(evaluate_random(pairs, seed)?)?);
    Ok(())
}
