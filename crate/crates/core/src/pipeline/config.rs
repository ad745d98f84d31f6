//! `key=value` configuration files and the experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::frontend::PairEncoding;
use crate::nn::{ArchOptions, TrainConfig};
use crate::signal::Condition;
use crate::tracking::FrontEndParams;
use crate::{Error, Result};

/// Ordered key/value pairs from a config file plus command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    /// One `key=value` per line; `#` starts a comment; blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", n + 1)));
            }
            entries.insert(k.replace('-', "_"), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.replace('-', "_"), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }
}

/// Feature front end feeding the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Two consecutive frames straight into a convolutional network.
    Cnn,
    /// Tracked-feature motion averaged over K-means regions, then a fully
    /// connected network.
    KltAnn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cnn => "cnn",
            Method::KltAnn => "klt-ann",
        }
    }

    pub fn default_arch(self) -> &'static str {
        match self {
            Method::Cnn => "c-8 p-2x2 c-16 p-2x2 fc-64 fc-3",
            Method::KltAnn => "fc-256 fc-256 fc-3",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cnn" => Ok(Method::Cnn),
            "klt-ann" | "klt_ann" | "klt" => Ok(Method::KltAnn),
            other => Err(Error::InvalidConfig(format!(
                "unknown method {other:?} (cnn or klt-ann)"
            ))),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_kernel(key: &str, v: &str) -> Result<(usize, usize)> {
    let v = v.replace('×', "x");
    let (h, w) = v.split_once(['x', 'X']).unwrap_or((&v, &v));
    let p = |s: &str| {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("{key}: bad kernel {v:?}")))
    };
    Ok((p(h)?, p(w)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub method: Method,
    pub arch: String,
    pub arch_options: ArchOptions,
    pub train: TrainConfig,
    pub split_seed: u64,
    /// Restricts the roster; `None` uses every participant found.
    pub participants: Option<Vec<u32>>,
    pub val_participant: Option<u32>,
    pub test_participant: Option<u32>,
    pub conditions: Vec<Condition>,
    pub clusters: usize,
    pub kmeans_images: usize,
    pub kmeans_iters: usize,
    pub front_end: FrontEndParams,
    /// Every n-th validation sample is scored during training.
    pub val_stride: usize,
    /// Channel layout of the frame-pair input (cnn only).
    pub pair_encoding: PairEncoding,
}

/// Every key understood by [`ExperimentConfig::from_kv`].
pub const EXPERIMENT_KEYS: &[&str] = &[
    "data",
    "method",
    "arch",
    "input_kernel",
    "hidden_kernel",
    "depth_multiplier",
    "learning_rate",
    "momentum",
    "dropout_rate",
    "dropout_depth",
    "eval_interval",
    "patience",
    "max_updates",
    "seed",
    "split_seed",
    "participants",
    "val",
    "test",
    "conditions",
    "clusters",
    "kmeans_images",
    "kmeans_iters",
    "max_features",
    "min_distance",
    "quality_level",
    "window",
    "pyramid_levels",
    "val_stride",
    "pair_encoding",
];

impl ExperimentConfig {
    /// Defaults for `method`; the learning rates are the ones that train the
    /// synthetic corpus in minutes.
    pub fn defaults(method: Method) -> Self {
        let train = match method {
            Method::Cnn => TrainConfig {
                learning_rate: 3e-5,
                momentum: 0.9,
                dropout_rate: 0.0,
                dropout_depth: 1,
                eval_interval: 10_000,
                patience: 5,
                max_updates: 150_000,
                seed: 1,
            },
            Method::KltAnn => TrainConfig {
                learning_rate: 1e-4,
                momentum: 0.9,
                dropout_rate: 0.0,
                dropout_depth: 1,
                eval_interval: 5_000,
                patience: 5,
                max_updates: 100_000,
                seed: 1,
            },
        };
        Self {
            data: PathBuf::from("data"),
            method,
            arch: method.default_arch().to_string(),
            arch_options: ArchOptions::default(),
            train,
            split_seed: 1,
            participants: None,
            val_participant: None,
            test_participant: None,
            conditions: Condition::ALL.to_vec(),
            clusters: 16,
            kmeans_images: 500,
            kmeans_iters: 100,
            front_end: FrontEndParams::default(),
            val_stride: match method {
                Method::Cnn => 3,
                Method::KltAnn => 1,
            },
            pair_encoding: PairEncoding::Difference,
        }
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !EXPERIMENT_KEYS.contains(k)) {
            return Err(Error::InvalidConfig(format!("unknown key {k:?}")));
        }
        let method: Method = kv.or("method", Method::Cnn)?;
        let mut c = Self::defaults(method);
        if let Some(d) = kv.get("data") {
            c.data = PathBuf::from(d);
        }
        if let Some(a) = kv.get("arch") {
            c.arch = a.to_string();
        }
        if let Some(v) = kv.get("input_kernel") {
            c.arch_options.input_kernel = parse_kernel("input_kernel", v)?;
        }
        if let Some(v) = kv.get("hidden_kernel") {
            c.arch_options.hidden_kernel = parse_kernel("hidden_kernel", v)?;
        }
        c.arch_options.depth_multiplier = kv.or("depth_multiplier", false)?;
        let t = &mut c.train;
        t.learning_rate = kv.or("learning_rate", t.learning_rate)?;
        t.momentum = kv.or("momentum", t.momentum)?;
        t.dropout_rate = kv.or("dropout_rate", t.dropout_rate)?;
        t.dropout_depth = kv.or("dropout_depth", t.dropout_depth)?;
        t.eval_interval = kv.or("eval_interval", t.eval_interval)?;
        t.patience = kv.or("patience", t.patience)?;
        let max_updates: f64 = kv.or("max_updates", t.max_updates as f64)?;
        t.max_updates = max_updates as usize;
        t.seed = kv.or("seed", t.seed)?;
        c.split_seed = kv.or("split_seed", t.seed)?;
        if let Some(v) = kv.get("participants") {
            c.participants = Some(parse_list("participants", v)?);
        }
        c.val_participant = kv.parsed("val")?;
        c.test_participant = kv.parsed("test")?;
        if let Some(v) = kv.get("conditions") {
            c.conditions = parse_list("conditions", v)?;
        }
        c.clusters = kv.or("clusters", c.clusters)?;
        c.kmeans_images = kv.or("kmeans_images", c.kmeans_images)?;
        c.kmeans_iters = kv.or("kmeans_iters", c.kmeans_iters)?;
        let f = &mut c.front_end;
        f.features.max_features = kv.or("max_features", f.features.max_features)?;
        f.features.min_distance = kv.or("min_distance", f.features.min_distance)?;
        f.features.quality_level = kv.or("quality_level", f.features.quality_level)?;
        f.klt.window = kv.or("window", f.klt.window)?;
        f.klt.pyramid_levels = kv.or("pyramid_levels", f.klt.pyramid_levels)?;
        c.val_stride = kv.or("val_stride", c.val_stride)?;
        c.pair_encoding = kv.or("pair_encoding", c.pair_encoding)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let (Some(v), Some(t)) = (self.val_participant, self.test_participant) {
            if v == t {
                return bad(format!("validation and test participant are both {v}"));
            }
        }
        if self.conditions.is_empty() {
            return bad("no conditions selected".into());
        }
        if self.clusters == 0
            || self.kmeans_images == 0
            || self.val_stride == 0
            || self.front_end.features.max_features == 0
        {
            return bad("clusters, kmeans_images, max_features and val_stride must be positive".into());
        }
        if self.front_end.klt.window < 3 || self.front_end.klt.window % 2 == 0 {
            return bad(format!(
                "window must be odd and at least 3, got {}",
                self.front_end.klt.window
            ));
        }
        if self.front_end.klt.pyramid_levels == 0 {
            return bad("pyramid_levels must be at least 1".into());
        }
        crate::nn::parse_architecture(&self.arch)?;
        Ok(())
    }

    /// Canonical `key=value` rendering; parsing it back gives the same
    /// configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let t = &self.train;
        let list = |v: &[String]| v.join(",");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("data", self.data.display().to_string());
        kv("method", self.method.as_str().into());
        kv("arch", self.arch.clone());
        let (ih, iw) = self.arch_options.input_kernel;
        let (hh, hw) = self.arch_options.hidden_kernel;
        kv("input_kernel", format!("{ih}x{iw}"));
        kv("hidden_kernel", format!("{hh}x{hw}"));
        kv("depth_multiplier", self.arch_options.depth_multiplier.to_string());
        kv("learning_rate", format!("{:e}", t.learning_rate));
        kv("momentum", t.momentum.to_string());
        kv("dropout_rate", t.dropout_rate.to_string());
        kv("dropout_depth", t.dropout_depth.to_string());
        kv("eval_interval", t.eval_interval.to_string());
        kv("patience", t.patience.to_string());
        kv("max_updates", t.max_updates.to_string());
        kv("seed", t.seed.to_string());
        kv("split_seed", self.split_seed.to_string());
        if let Some(p) = &self.participants {
            kv("participants", list(&p.iter().map(u32::to_string).collect::<Vec<_>>()));
        }
        if let Some(v) = self.val_participant {
            kv("val", v.to_string());
        }
        if let Some(v) = self.test_participant {
            kv("test", v.to_string());
        }
        kv(
            "conditions",
            list(&self.conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>()),
        );
        kv("clusters", self.clusters.to_string());
        kv("kmeans_images", self.kmeans_images.to_string());
        kv("kmeans_iters", self.kmeans_iters.to_string());
        let f = &self.front_end;
        kv("max_features", f.features.max_features.to_string());
        kv("min_distance", f.features.min_distance.to_string());
        kv("quality_level", f.features.quality_level.to_string());
        kv("window", f.klt.window.to_string());
        kv("pyramid_levels", f.klt.pyramid_levels.to_string());
        kv("val_stride", self.val_stride.to_string());
        kv("pair_encoding", self.pair_encoding.as_str().into());
        s
    }

    /// FNV-1a digest of [`Self::to_text`], as 16 hex digits.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
