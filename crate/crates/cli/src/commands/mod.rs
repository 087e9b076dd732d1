pub mod analyze;
pub mod extract;
pub mod plan;
pub mod route;
pub mod synth;
pub mod tree;

use std::path::Path;

use anyhow::Context;
use llm_dna::extraction::DnaStore;

use crate::UsageError;

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn load_store(dir: &Path) -> anyhow::Result<DnaStore> {
    DnaStore::load(dir).with_context(|| format!("cannot load DNA store {}", dir.display()))
}

pub fn path_str(p: &Path) -> String {
    p.display().to_string()
}
