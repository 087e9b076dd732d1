use clap::Args;
use llm_dna::dna::{hoeffding_sample_size, plan_from_constants};

use crate::config::Settings;
use crate::output::Report;

#[derive(Args, Debug)]
pub struct PlanArgs {
    /// Lower distance-preservation constant
    #[arg(long)]
    c1: f64,
    /// Upper distance-preservation constant
    #[arg(long)]
    c2: f64,
    /// Number of models the guarantee must cover
    #[arg(long)]
    k: usize,
    /// Also size the prompt sample for this accuracy
    #[arg(long)]
    hoeffding_eps: Option<f64>,
    /// Failure probability for the prompt sample
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Bound on a single distance term
    #[arg(long, default_value_t = 1.0)]
    c_max: f64,
}

pub fn run(settings: &Settings, a: PlanArgs) -> anyhow::Result<()> {
    let plan = plan_from_constants(a.c1, a.c2, a.k)?;
    let mut report = Report::new("plan", settings);
    report.config("c1", a.c1).config("c2", a.c2).config("k", a.k);
    report
        .result("epsilon", plan.epsilon)
        .result("alpha", plan.alpha)
        .result("dna_dim", plan.dna_dim);
    if let Some(eps) = a.hoeffding_eps {
        let c = hoeffding_sample_size(eps, a.delta, a.c_max)?;
        report
            .config("hoeffding_eps", eps)
            .config("delta", a.delta)
            .config("c_max", a.c_max);
        report.result("prompts", c.t).result("tail_bound", c.tail());
    }
    report.emit(settings.format);
    Ok(())
}
