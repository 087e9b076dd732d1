//! Behavioral "DNA" for text-generation models.
//!
//! A model's DNA is a short vector obtained by embedding its responses to a
//! fixed prompt sample, concatenating the embeddings, and applying a seeded
//! Gaussian random projection. Distances between DNAs approximate distances
//! between the models' behavior, which supports relation detection, routing
//! and phylogenetic reconstruction.
//!
//! The crate is organized by stage:
//!
//! - [`dna`]: representations, projections, distances and planners.
//! - [`model_io`]: prompt sampling, OpenAI-compatible HTTP access and caches.
//! - [`extraction`]: the end-to-end pipeline and the on-disk [`extraction::DnaStore`].
//! - [`analysis`]: distance matrices, the Mantel test, and SVM relation detection.
//! - [`phylo`]: Neighbor-Joining, midpoint rooting and Newick I/O.
//! - [`routing`]: a query router over frozen DNAs.
//! - [`synth`]: synthetic model families and a scriptable mock endpoint.

pub mod analysis;
pub mod dna;
mod error;
pub mod extraction;
pub mod model_io;
pub mod phylo;
pub mod routing;
pub mod synth;
pub mod util;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/projection.md")]
    pub struct Projection;
    #[doc = include_str!("../../../book/src/concentration.md")]
    pub struct Concentration;
    #[doc = include_str!("../../../book/src/extraction.md")]
    pub struct Extraction;
    #[doc = include_str!("../../../book/src/distances.md")]
    pub struct Distances;
    #[doc = include_str!("../../../book/src/relations.md")]
    pub struct Relations;
    #[doc = include_str!("../../../book/src/phylogeny.md")]
    pub struct Phylogeny;
    #[doc = include_str!("../../../book/src/routing.md")]
    pub struct Routing;
    #[doc = include_str!("../../../book/src/synthetic.md")]
    pub struct Synthetic;
}
