//! Numerical core: functional representations, seeded Gaussian projections,
//! DNA and functional distances, and the JL / Hoeffding planners.

mod plan;
mod projection;
mod representation;

pub use plan::{
    hoeffding_sample_size, hoeffding_tail, jl_dimension, plan_from_constants, ConcentrationPlan,
    JlPlan,
};
pub use projection::{
    project, project_streaming, sample_projection, ProjectionKind, ProjectionMatrix,
    ProjectionSpec,
};
pub use representation::{dna_distance, functional_distance, DnaRecord, FunctionalRepresentation};
