//! Synthetic speckle sequences with known motion, and the on-disk dataset
//! format.

mod dataset;
mod motion;
mod render;
mod texture;

pub use dataset::{read_dataset, write_dataset, DatasetMeta, DATASET_VERSION, FRAMES_MAGIC};
pub use motion::{depth_profile, motion_field, MotionField};
pub use render::{render_sequence, MotionGains, RenderOptions, UltrasoundSequence};
pub use texture::{gaussian_blur, gen_speckle_texture, SpeckleTexture};
