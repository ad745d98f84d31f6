//! Predicting per-frame changes in muscle state (EMG, joint torque, joint
//! angle) from consecutive ultrasound-like frames.
//!
//! Two methods share one harness:
//!
//! * **klt-ann**: Shi-Tomasi features, pyramidal Lucas-Kanade tracking,
//!   K-means cluster integration, then a fully connected network.
//! * **cnn**: a convolutional network fed the raw two-frame stack.
//!
//! A synthetic speckle generator driven by a known motion plant supplies
//! data with ground truth; see [`synth`] and [`signal`].

pub mod error;
pub mod nn;
pub mod numerics;
pub mod pipeline;
pub mod roi;
pub mod signal;
pub mod synth;
pub mod tracking;

pub use error::{Error, ErrorClass, Result};
