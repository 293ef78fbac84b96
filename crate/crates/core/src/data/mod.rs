//! Synthetic triangle/rectangle objects, group-aware splits and the on-disk
//! dataset format.

mod dataset;
mod shapes;
mod split;
mod store;

pub(crate) use dataset::stream_rng;
pub use dataset::{ObjectSource, SampleMeta, Split, SyntheticDataset, SyntheticParams, GENERATOR_VERSION};
pub use shapes::{generate_shape, object_from_amplitude, place_amplitude, ShapeKind, EXTENT_RANGE, MIN_CANVAS};
pub use split::{split_dataset, SplitIndices};
pub(crate) use store::sha256_hex;
pub use store::{
    load_object_stack, save_dataset, DatasetEntry, DatasetManifest, SampleRecord, SaveInfo, StoredDataset,
    DATASET_VERSION, LABELS_HEADER,
};
