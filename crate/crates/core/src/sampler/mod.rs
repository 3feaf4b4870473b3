//! Data ingestion and self-labeled contextual-group task construction.

mod hsi;
mod image_store;
mod task;

pub use hsi::{load_hsi, read_cube, read_label_map, write_cube, write_label_map, CubeHeader, HsiCube};
pub use image_store::{load_rgb_dataset, ImageStore, StoredImage};
pub use task::{
    augment_patch, build_task, slide_lattice_size, split_em, SampleMode, SampleSource,
    SamplerConfig, TaskDataset, TaskExample,
};

pub(crate) use task::partial_shuffle;
