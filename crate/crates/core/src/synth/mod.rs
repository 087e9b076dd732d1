//! Synthetic populations and a mock model server, used to check the
//! library's guarantees without real models.

mod distortion;
mod families;
mod fixtures;
mod mock;
mod trees;

pub use distortion::{distortion_experiment, distortion_report, wilson_interval, DistortionExperiment, DistortionReport};
pub use families::{make_family_representations, perturb, SyntheticFamilySpec, SYNTHETIC_EMBEDDER};
pub use fixtures::{relation_fixture, routing_cluster_fixture, synthetic_org, RelationFixture};
pub use mock::{mock_embedding, spawn_mock_endpoint, DimSwitch, Fallback, LoggedRequest, MockScript, MockServer, ModelScript};
pub use trees::random_binary_tree;
