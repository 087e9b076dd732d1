use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use llm_dna::analysis::distance_matrix;
use llm_dna::phylo::{family_distance_matrix, midpoint_root, neighbor_joining, read_family_map, to_newick};

use super::{load_store, path_str};
use crate::config::Settings;
use crate::output::Report;

#[derive(Args, Debug)]
pub struct TreeArgs {
    /// DNA store directory
    #[arg(long)]
    dna: PathBuf,
    /// CSV of model_id,family; builds the tree over family centroids
    #[arg(long)]
    group_by: Option<PathBuf>,
    /// Newick output file; printed in the result when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(settings: &Settings, a: TreeArgs) -> anyhow::Result<()> {
    let store = load_store(&a.dna)?;
    let matrix = match &a.group_by {
        Some(path) => family_distance_matrix(&store, &read_family_map(path)?)?,
        None => distance_matrix(&store)?,
    };
    let tree = midpoint_root(&neighbor_joining(&matrix)?)?;
    let newick = to_newick(&tree);
    let mut report = Report::new("tree", settings);
    report.config("dna", path_str(&a.dna)).config("method", "neighbor-joining, midpoint rooted");
    if let Some(g) = &a.group_by {
        report.config("group_by", path_str(g)).config("aggregation", "centroid");
    }
    report.result("leaves", tree.leaf_count());
    match &a.out {
        Some(out) => {
            std::fs::write(out, format!("{newick}\n")).with_context(|| out.display().to_string())?;
            report.config("out", path_str(out));
        }
        None => {
            report.result("newick", newick);
        }
    }
    report.emit(settings.format);
    Ok(())
}
