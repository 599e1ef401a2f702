//! Synthetic datasets, stratified splits and the standard deletion protocol.

pub mod io;
pub mod split;
pub mod synth;

pub use io::{export_split, import_split, SplitSidecar};
pub use split::{
    corrupt_labels, deletion_count, sample_deletion_set, shift_testset, DatasetSplit, ShiftKind,
};
pub use synth::{generate, Generator, SynthSpec};
