//! Population-level analysis of DNA vectors: distance matrices, the Mantel
//! stability test, and relation detection between pairs of models.

mod mantel;
mod matrix;
mod metrics;
mod relation;
mod svm;

pub use mantel::{mantel_test, pearson, MantelResult};
pub use matrix::{distance_matrix, distance_matrix_of, DistanceMatrix};
pub use metrics::{auc, evaluate_binary, BinaryMetrics};
pub use relation::{
    evaluate_greedy, evaluate_random, greedy_baseline, pair_features, random_baseline, read_pairs,
    stratified_split, with_negative_samples, write_pairs, Relation, RelationClassifier, RelationPair,
};
pub use svm::{rbf, svm_predict, svm_train, Gamma, SvmModel, SvmParams};
