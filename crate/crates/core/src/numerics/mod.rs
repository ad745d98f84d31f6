//! Shared numeric building blocks: tensors, images, statistics and seeded
//! randomness.

mod image;
mod rng;
mod stats;
mod tensor;

pub use image::{bilinear_sample, GrayImage};
pub use rng::{gaussian_draws, SeededRng};
pub use stats::{correlation, mean, rank_average, sample_std, zscore_normalize, CorrelationKind, Normalization};
pub use tensor::Tensor;
