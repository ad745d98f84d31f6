//! Turning frame pairs into network inputs.

use std::fmt::Write as _;
use std::path::Path;

use super::config::{ExperimentConfig, Method};
use super::corpus::Recording;
use crate::nn::{InputNormMode, SampleSource, Shape3};
use crate::numerics::SeededRng;
use crate::tracking::{cluster_motion_for_pair, kmeans_fit, select_good_features, ClusterModel, FrontEndParams};
use crate::{Error, Result};

/// How a frame pair is laid out as two image channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairEncoding {
    /// Channel 0 is frame `t-1`, channel 1 frame `t`.
    Frames,
    /// Channel 0 is frame `t-1`, channel 1 the difference `t - (t-1)`.
    /// The same information, but after per-channel scaling the motion
    /// signal is no longer buried under texture contrast.
    Difference,
}

impl PairEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            PairEncoding::Frames => "frames",
            PairEncoding::Difference => "difference",
        }
    }

    /// Frame pair back from the two channels.
    pub fn decode(self, ch0: &[f64], ch1: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            PairEncoding::Frames => (ch0.to_vec(), ch1.to_vec()),
            PairEncoding::Difference => (ch0.to_vec(), ch0.iter().zip(ch1).map(|(a, d)| a + d).collect()),
        }
    }
}

impl std::str::FromStr for PairEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "frames" => Ok(PairEncoding::Frames),
            "difference" | "diff" => Ok(PairEncoding::Difference),
            other => Err(Error::InvalidConfig(format!(
                "unknown pair encoding {other:?} (frames or difference)"
            ))),
        }
    }
}

/// Feature front end with everything fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub enum FrontEnd {
    /// Two consecutive frames as a two-channel image.
    Frames(PairEncoding),
    /// Per-cluster mean KLT displacement.
    ClusterMotion {
        clusters: ClusterModel,
        params: FrontEndParams,
    },
}

impl FrontEnd {
    pub fn method(&self) -> Method {
        match self {
            FrontEnd::Frames(_) => Method::Cnn,
            FrontEnd::ClusterMotion { .. } => Method::KltAnn,
        }
    }

    pub fn input_shape(&self, height: usize, width: usize) -> Shape3 {
        match self {
            FrontEnd::Frames(_) => Shape3::new(2, height, width),
            FrontEnd::ClusterMotion { clusters, .. } => Shape3::new(1, 1, 2 * clusters.k()),
        }
    }

    /// Cluster vectors share one scale: vertical cluster motion is nearly
    /// constant, and per-element scaling would blow up its tracking noise.
    pub fn norm_mode(&self) -> InputNormMode {
        match self {
            FrontEnd::Frames(_) => InputNormMode::PerChannel,
            FrontEnd::ClusterMotion { .. } => InputNormMode::Shared,
        }
    }

    /// Network inputs for every consecutive pair of a recording, or `None`
    /// when inputs are read straight from the frames.
    pub fn encode(&self, rec: &Recording) -> Result<Option<Vec<Vec<f64>>>> {
        match self {
            FrontEnd::Frames(_) => Ok(None),
            FrontEnd::ClusterMotion { clusters, params } => {
                let mut out = Vec::with_capacity(rec.len().saturating_sub(1));
                let mut prev = rec.frame(0);
                for k in 1..rec.len() {
                    let next = rec.frame(k);
                    out.push(cluster_motion_for_pair(&prev, &next, clusters, params)?.values);
                    prev = next;
                }
                Ok(Some(out))
            }
        }
    }
}

/// Fits K-means regions on features of `images` frames spread evenly over
/// the training recordings.
pub fn fit_clusters(train: &[&Recording], cfg: &ExperimentConfig) -> Result<ClusterModel> {
    let total: usize = train.iter().map(|r| r.len()).sum();
    if total == 0 {
        return Err(Error::EmptyData("no training frames for clustering".into()));
    }
    let n = cfg.kmeans_images.min(total);
    let mut points = Vec::new();
    for j in 0..n {
        let mut idx = j * total / n;
        let rec = train
            .iter()
            .find(|r| {
                if idx < r.len() {
                    true
                } else {
                    idx -= r.len();
                    false
                }
            })
            .expect("index within total");
        let feats = select_good_features(&rec.frame(idx), &cfg.front_end.features)?;
        points.extend(feats.iter().map(|f| (f.x, f.y)));
    }
    let mut rng = SeededRng::new(cfg.train.seed).child_named("kmeans");
    Ok(kmeans_fit(&points, cfg.clusters, cfg.kmeans_iters, &mut rng)?.model)
}

pub fn clusters_to_text(model: &ClusterModel) -> String {
    let mut s = String::from("# x y\n");
    for (x, y) in &model.centroids {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}

pub fn clusters_from_text(text: &str, path: &Path) -> Result<ClusterModel> {
    let mut centroids = Vec::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(x)), Some(Ok(y)), None) => centroids.push((x, y)),
            _ => {
                return Err(Error::CorruptDataset(format!(
                    "{}: bad centroid line {line:?}",
                    path.display()
                )))
            }
        }
    }
    if centroids.is_empty() {
        return Err(Error::CorruptDataset(format!("{}: no centroids", path.display())));
    }
    Ok(ClusterModel { centroids })
}

/// Consecutive-pair samples of several recordings. Targets are the label
/// deltas at the later frame.
pub struct PairSamples<'a> {
    recs: Vec<&'a Recording>,
    encoded: Vec<Option<Vec<Vec<f64>>>>,
    index: Vec<(usize, usize)>,
    pair: PairEncoding,
}

impl<'a> PairSamples<'a> {
    pub fn new(recs: &[&'a Recording], front: &FrontEnd, stride: usize) -> Result<Self> {
        let mut encoded = Vec::with_capacity(recs.len());
        let mut index = Vec::new();
        for (ri, r) in recs.iter().enumerate() {
            encoded.push(front.encode(r)?);
            index.extend((1..r.len()).step_by(stride.max(1)).map(|k| (ri, k)));
        }
        let pair = match front {
            FrontEnd::Frames(p) => *p,
            FrontEnd::ClusterMotion { .. } => PairEncoding::Frames,
        };
        Ok(Self {
            recs: recs.to_vec(),
            encoded,
            index,
            pair,
        })
    }

    /// Same recordings and encodings, every `stride`-th pair.
    pub fn strided(&self, stride: usize) -> PairSamples<'a> {
        PairSamples {
            recs: self.recs.clone(),
            encoded: self.encoded.clone(),
            index: self.index.iter().copied().step_by(stride.max(1)).collect(),
            pair: self.pair,
        }
    }

    /// Recording and frame index of sample `i`.
    pub fn locate(&self, i: usize) -> (&'a Recording, usize) {
        let (r, k) = self.index[i];
        (self.recs[r], k)
    }
}

impl SampleSource for PairSamples<'_> {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn fill(&self, i: usize, input: &mut Vec<f64>, target: &mut Vec<f64>) {
        let (ri, k) = self.index[i];
        input.clear();
        match &self.encoded[ri] {
            Some(v) => input.extend_from_slice(&v[k - 1]),
            None => {
                let r = self.recs[ri];
                let (a, b) = (r.frame_pixels(k - 1), r.frame_pixels(k));
                input.extend(a.iter().map(|&p| f64::from(p)));
                match self.pair {
                    PairEncoding::Frames => input.extend(b.iter().map(|&p| f64::from(p))),
                    PairEncoding::Difference => {
                        input.extend(a.iter().zip(b).map(|(&p, &q)| f64::from(q) - f64::from(p)))
                    }
                }
            }
        }
        target.clear();
        target.extend_from_slice(&self.recs[ri].labels.delta(k));
    }
}
