//! KLT front end: corner selection, pyramidal Lucas-Kanade tracking,
//! K-means integration regions and the fixed-length cluster motion vector.

mod features;
mod integrate;
mod klt;
mod kmeans;

pub use features::{gradients, min_eigenvalue_map, select_good_features, Feature, FeatureParams, ScoreMap};
pub use integrate::{integrate_cluster_motion, ClusterMotionVector};
pub use klt::{build_pyramid, klt_track, KltParams, Track, TrackStatus};
pub use kmeans::{kmeans_fit, ClusterModel, KMeansFit};

use crate::numerics::GrayImage;
use crate::Result;

/// Per-frame-pair settings of the whole front end.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndParams {
    pub features: FeatureParams,
    pub klt: KltParams,
}

impl Default for FrontEndParams {
    fn default() -> Self {
        Self {
            features: FeatureParams::default(),
            klt: KltParams::default(),
        }
    }
}

/// Selects fresh features in `prev`, tracks them into `next` and averages
/// their motion per cluster.
pub fn cluster_motion_for_pair(
    prev: &GrayImage,
    next: &GrayImage,
    clusters: &ClusterModel,
    params: &FrontEndParams,
) -> Result<ClusterMotionVector> {
    let feats = select_good_features(prev, &params.features)?;
    let tracks = klt_track(prev, next, &feats, &params.klt);
    integrate_cluster_motion(&feats, &tracks, clusters)
}
