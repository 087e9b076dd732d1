//! End-to-end DNA extraction and the persistent [`DnaStore`].
//!
//! Store layout on disk:
//!
//! ```text
//! <dir>/manifest.json  {"projection":{"seed","L","D","entry_std"},"alpha","embedder_id","prompt_set_hash","version"}
//! <dir>/dna.jsonl      one {"model_id","vector":[f32...],"created_at"} per line
//! ```

mod pipeline;
mod store;

pub use pipeline::{
    extract_dna, extract_fleet, extract_representation, FleetOptions, FleetReport, ModelFailure,
    ProjectionPlan,
};
pub use store::{read_manifest, DnaStore, Manifest, MANIFEST_FILE, RECORDS_FILE};
