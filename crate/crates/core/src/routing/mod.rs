//! Query routing with frozen DNAs.
//!
//! A router maps a query embedding `x` into DNA space with a learned matrix
//! `W` and scores model `m` as `sigmoid(dna_m . W x + b_m)`, where `dna_m` is
//! the model's unit-normalized DNA. Only `W` and the biases are trained.

mod dataset;
mod router;

pub use dataset::{read_examples, write_examples, RoutingExample};
pub use router::{
    expected_random_accuracy, random_router_accuracy, routing_accuracy, single_best_baseline, train_router,
    unit_normalize, LossGradient, RouterHyperparams, RouterModel, RouterTraining, Scoring, SingleBest,
};
