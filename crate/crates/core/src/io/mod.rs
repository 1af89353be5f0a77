//! File formats, datasets, the synthetic cohort generator and checkpoints.
//!
//! Readers reject malformed input with file and line context rather than
//! repairing it. Writers go through a temporary file and a rename.

mod checkpoint;
mod dataset;
mod formats;
mod synth;

pub use checkpoint::{
    blob_path, load_checkpoint, save_checkpoint, sha256_hex, Checkpoint, CHECKPOINT_VERSION,
};
pub use dataset::{default_class_names, stratified_split, Dataset, Split};
pub use formats::{
    panel_csv, read_expression, read_gmt, read_labels, read_panel, write_atomic, write_expression,
    write_gmt, write_labels, write_panel,
};
pub use synth::{generate_synthetic, PlantedPair, SynthConfig, SynthLayout, SyntheticData};
