use super::{ClusterModel, Feature, Track};
use crate::{Error, Result};

/// Per-cluster mean displacement, interleaved `[dx0, dy0, dx1, dy1, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMotionVector {
    pub values: Vec<f64>,
    /// Clusters that received no successfully tracked feature.
    pub empty_clusters: usize,
}

impl ClusterMotionVector {
    pub fn k(&self) -> usize {
        self.values.len() / 2
    }

    pub fn cluster(&self, i: usize) -> (f64, f64) {
        (self.values[2 * i], self.values[2 * i + 1])
    }
}

/// Averages tracked motion per cluster. Lost tracks are skipped; clusters
/// left without features contribute `(0, 0)`.
pub fn integrate_cluster_motion(
    feats: &[Feature],
    tracks: &[Track],
    clusters: &ClusterModel,
) -> Result<ClusterMotionVector> {
    if feats.len() != tracks.len() {
        return Err(Error::MisalignedTracks {
            features: feats.len(),
            tracks: tracks.len(),
        });
    }
    let k = clusters.k();
    let mut acc = vec![(0.0, 0.0, 0usize); k];
    for (f, t) in feats.iter().zip(tracks) {
        if !t.is_ok() {
            continue;
        }
        let c = clusters.assign((f.x, f.y));
        acc[c].0 += t.dx;
        acc[c].1 += t.dy;
        acc[c].2 += 1;
    }
    let mut values = Vec::with_capacity(2 * k);
    let mut empty = 0;
    for (sx, sy, n) in acc {
        if n == 0 {
            empty += 1;
            values.extend([0.0, 0.0]);
        } else {
            values.extend([sx / n as f64, sy / n as f64]);
        }
    }
    Ok(ClusterMotionVector {
        values,
        empty_clusters: empty,
    })
}
