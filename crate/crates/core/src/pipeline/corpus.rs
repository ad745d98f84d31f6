//! Multi-participant synthetic corpus: generation and loading.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::KvConfig;
use crate::numerics::{GrayImage, SeededRng};
use crate::signal::{compose_schedule, make_label_track, Condition, LabelTrack, PlantConfig, Role};
use crate::synth::{gen_speckle_texture, read_dataset, render_sequence, write_dataset, MotionGains, RenderOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub participants: u32,
    /// Trial length after the rest hold.
    pub seconds: f64,
    pub fps: f64,
    pub seed: u64,
    pub region_height: usize,
    pub region_width: usize,
    pub grain: f64,
    /// Uniform relative jitter applied per participant to plant and motion
    /// gains.
    pub gain_jitter: f64,
    pub plant: PlantConfig,
    pub gains: MotionGains,
    pub decorrelation_std: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            participants: 6,
            seconds: 60.0,
            fps: 25.0,
            seed: 1,
            region_height: 24,
            region_width: 96,
            grain: 3.0,
            gain_jitter: 0.1,
            plant: PlantConfig::default(),
            gains: MotionGains::default(),
            decorrelation_std: 0.0,
        }
    }
}

/// Every key understood by [`CorpusConfig::from_kv`].
pub const CORPUS_KEYS: &[&str] = &[
    "participants",
    "seconds",
    "fps",
    "seed",
    "grain",
    "region",
    "gain_jitter",
    "noise_frac",
    "active_px",
    "passive_px",
    "decorrelation_std",
];

/// Per-participant variation drawn from the corpus seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantProfile {
    pub id: u32,
    pub texture_seed: u64,
    pub plant: PlantConfig,
    pub gains: MotionGains,
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.participants == 0 {
            return bad("participants must be positive".into());
        }
        if !(self.seconds > 0.0 && self.fps > 0.0) {
            return bad(format!(
                "seconds and fps must be positive (got {} and {})",
                self.seconds, self.fps
            ));
        }
        if !(0.0..1.0).contains(&self.gain_jitter) {
            return bad(format!("gain jitter must lie in [0, 1), got {}", self.gain_jitter));
        }
        self.plant.validate()
    }

    pub fn profile(&self, id: u32) -> ParticipantProfile {
        let mut rng = SeededRng::new(self.seed)
            .child_named("participant")
            .child(u64::from(id));
        let texture_seed = rng.next_u64();
        let mut jitter = || 1.0 + self.gain_jitter * (2.0 * rng.uniform() - 1.0);
        let plant = PlantConfig {
            k_active: self.plant.k_active * jitter(),
            k_passive: self.plant.k_passive * jitter(),
            ..self.plant.clone()
        };
        let gains = MotionGains {
            active_px: self.gains.active_px * jitter(),
            passive_px: self.gains.passive_px * jitter(),
            ..self.gains.clone()
        };
        ParticipantProfile {
            id,
            texture_seed,
            plant,
            gains,
        }
    }

    /// Applies the corpus keys of `kv` over the defaults; any other key is
    /// an error.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        if let Some(k) = kv.keys().find(|k| !CORPUS_KEYS.contains(k)) {
            return Err(Error::InvalidConfig(format!("unknown key {k:?}")));
        }
        let mut c = Self::default();
        c.participants = kv.or("participants", c.participants)?;
        c.seconds = kv.or("seconds", c.seconds)?;
        c.fps = kv.or("fps", c.fps)?;
        c.seed = kv.or("seed", c.seed)?;
        c.grain = kv.or("grain", c.grain)?;
        if let Some(v) = kv.get("region") {
            let (h, w) = v
                .split_once(['x', 'X'])
                .and_then(|(h, w)| Some((h.trim().parse().ok()?, w.trim().parse().ok()?)))
                .ok_or_else(|| Error::InvalidConfig(format!("region: expected HxW, got {v:?}")))?;
            c.region_height = h;
            c.region_width = w;
        }
        c.gain_jitter = kv.or("gain_jitter", c.gain_jitter)?;
        c.plant.noise_frac = kv.or("noise_frac", c.plant.noise_frac)?;
        c.gains.active_px = kv.or("active_px", c.gains.active_px)?;
        c.gains.passive_px = kv.or("passive_px", c.gains.passive_px)?;
        c.decorrelation_std = kv.or("decorrelation_std", c.decorrelation_std)?;
        c.validate()?;
        Ok(c)
    }

    fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "participants={}", self.participants);
        let _ = writeln!(s, "seconds={}", self.seconds);
        let _ = writeln!(s, "fps={}", self.fps);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "region={}x{}", self.region_height, self.region_width);
        let _ = writeln!(s, "grain={}", self.grain);
        let _ = writeln!(s, "gain_jitter={}", self.gain_jitter);
        let _ = writeln!(s, "noise_frac={}", self.plant.noise_frac);
        let _ = writeln!(s, "active_px={}", self.gains.active_px);
        let _ = writeln!(s, "passive_px={}", self.gains.passive_px);
        s
    }
}

pub fn dataset_dir(root: &Path, participant: u32, condition: Condition) -> PathBuf {
    root.join(format!("p{participant:02}")).join(condition.as_str())
}

/// Renders every participant under every condition into `root`.
pub fn synth_corpus(root: &Path, cfg: &CorpusConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let screen = compose_schedule(Role::Screen, cfg.seconds);
    let pedal = compose_schedule(Role::Pedal, cfg.seconds);
    let worst = (cfg.gains.active_px + cfg.gains.passive_px) * (1.0 + cfg.gain_jitter) * 1.1;
    let margin = worst.ceil() as usize + 2;
    let tex_h = (cfg.region_height + 8).max(32);
    let tex_w = (cfg.region_width + 2 * margin).max(32);
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for id in 1..=cfg.participants {
        let prof = cfg.profile(id);
        let texture = gen_speckle_texture(tex_h, tex_w, cfg.grain, &mut SeededRng::new(prof.texture_seed))?;
        for condition in Condition::ALL {
            let mut rng = SeededRng::new(cfg.seed)
                .child_named("labels")
                .child(u64::from(id) * 8 + condition as u64);
            let labels = make_label_track(
                condition.drives_screen().then_some(&screen),
                condition.drives_pedal().then_some(&pedal),
                cfg.seconds,
                &prof.plant,
                cfg.fps,
                &mut rng,
            )?;
            let opts = RenderOptions {
                region_height: cfg.region_height,
                region_width: cfg.region_width,
                fps: cfg.fps,
                participant: id,
                condition,
                decorrelation_std: cfg.decorrelation_std,
                decorrelation_seed: rng.next_u64(),
                ..RenderOptions::default()
            };
            let seq = render_sequence(&texture, &labels, &prof.gains, &opts)?;
            let dir = dataset_dir(root, id, condition);
            write_dataset(&seq, &labels, &dir)?;
            dirs.push(dir);
        }
    }
    let p = root.join("corpus.txt");
    fs::write(&p, cfg.to_text()).map_err(|e| Error::io(&p, e))?;
    Ok(dirs)
}

/// One loaded dataset with frames kept at storage precision.
#[derive(Debug, Clone)]
pub struct Recording {
    pub participant: u32,
    pub condition: Condition,
    pub height: usize,
    pub width: usize,
    frames: Vec<f32>,
    pub labels: LabelTrack,
}

impl Recording {
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let (seq, labels) = read_dataset(dir)?;
        let (height, width) = seq.dims();
        let mut frames = Vec::with_capacity(seq.len() * height * width);
        for f in &seq.frames {
            frames.extend(f.pixels().iter().map(|&p| p as f32));
        }
        Ok(Self {
            participant: seq.participant,
            condition: seq.condition,
            height,
            width,
            frames,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frame_pixels(&self, k: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.frames[k * n..(k + 1) * n]
    }

    pub fn frame(&self, k: usize) -> GrayImage {
        let px = self.frame_pixels(k).iter().map(|&p| f64::from(p)).collect();
        GrayImage::new(self.height, self.width, px).expect("stored frame dims are consistent")
    }
}

/// Finds dataset directories (those holding `meta.txt`) below `root`,
/// sorted by path.
pub fn find_datasets(root: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        if dir.join("meta.txt").is_file() {
            out.push(dir.to_path_buf());
            return Ok(());
        }
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for e in entries {
            let p = e.map_err(|e| Error::io(dir, e))?.path();
            if p.is_dir() {
                walk(&p, out)?;
            }
        }
        Ok(())
    }
    if !root.is_dir() {
        return Err(Error::NotADataset(root.to_path_buf()));
    }
    let mut out = Vec::new();
    walk(root, &mut out)?;
    out.sort();
    if out.is_empty() {
        return Err(Error::NotADataset(root.to_path_buf()));
    }
    Ok(out)
}

/// Loads every dataset below `root`, sorted by (participant, condition).
pub fn load_corpus(root: &Path) -> Result<Vec<Recording>> {
    let mut recs = find_datasets(root)?
        .iter()
        .map(|d| Recording::from_dir(d))
        .collect::<Result<Vec<_>>>()?;
    recs.sort_by_key(|r| (r.participant, r.condition));
    if let Some(first) = recs.first() {
        if recs.iter().any(|r| (r.height, r.width) != (first.height, first.width)) {
            return Err(Error::InconsistentDataset("recordings differ in frame size".into()));
        }
    }
    Ok(recs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            participants: 2,
            seconds: 2.0,
            plant: PlantConfig {
                hold_seconds: 0.4,
                ..PlantConfig::default()
            },
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn writes_and_loads_every_recording() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let dirs = synth_corpus(dir.path(), &cfg).unwrap();
        assert_eq!(dirs.len(), 6);
        let recs = load_corpus(dir.path()).unwrap();
        assert_eq!(recs.len(), 6);
        assert_eq!((recs[0].participant, recs[0].condition), (1, Condition::Isometric));
        assert_eq!(recs[0].len(), 60);
        assert_eq!((recs[0].height, recs[0].width), (24, 96));
        for r in &recs {
            for k in 0..r.len() {
                assert!(r.frame(k).in_unit_range());
            }
        }
    }

    #[test]
    fn profiles_are_jittered_within_bounds() {
        let cfg = CorpusConfig::default();
        let a = cfg.profile(1);
        let b = cfg.profile(2);
        assert_ne!(a.texture_seed, b.texture_seed);
        for p in [&a, &b] {
            let r = p.gains.passive_px / cfg.gains.passive_px;
            assert!((0.9..=1.1).contains(&r));
            let r = p.plant.k_active / cfg.plant.k_active;
            assert!((0.9..=1.1).contains(&r));
        }
        assert_eq!(cfg.profile(1), a);
    }

    #[test]
    fn missing_root_is_not_a_dataset() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            load_corpus(&dir.path().join("nope")).unwrap_err().kind(),
            "not-a-dataset"
        );
        assert_eq!(load_corpus(dir.path()).unwrap_err().kind(), "not-a-dataset");
    }
}
