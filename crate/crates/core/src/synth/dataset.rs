//! Directory format: `meta.txt` (key=value), `frames.bin` (`MUSQ` header +
//! little-endian f32 frames) and `labels.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::UltrasoundSequence;
use crate::numerics::GrayImage;
use crate::signal::LabelTrack;
use crate::{Error, Result};

pub const FRAMES_MAGIC: &[u8; 4] = b"MUSQ";
pub const DATASET_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4;

/// Contents of `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub version: u32,
    pub fps: f64,
    pub pixel_pitch_mm: f64,
    pub condition: crate::signal::Condition,
    pub participant: u32,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

impl DatasetMeta {
    fn to_text(&self) -> String {
        format!(
            "version={}\nfps={}\npixel_pitch_mm={}\ncondition={}\nparticipant={}\nframes={}\nheight={}\nwidth={}\n",
            self.version,
            self.fps,
            self.pixel_pitch_mm,
            self.condition,
            self.participant,
            self.frames,
            self.height,
            self.width
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::CorruptDataset(format!("meta.txt line {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn field<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            kv.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::CorruptDataset(format!("meta.txt: missing or bad {key}")))
        }
        Ok(Self {
            version: field(&kv, "version")?,
            fps: field(&kv, "fps")?,
            pixel_pitch_mm: field(&kv, "pixel_pitch_mm")?,
            condition: kv
                .get("condition")
                .ok_or_else(|| Error::CorruptDataset("meta.txt: missing condition".into()))?
                .parse()
                .map_err(|_| Error::CorruptDataset("meta.txt: bad condition".into()))?,
            participant: field(&kv, "participant")?,
            frames: field(&kv, "frames")?,
            height: field(&kv, "height")?,
            width: field(&kv, "width")?,
        })
    }

    /// Reads only `meta.txt` of a dataset directory.
    pub fn read(dir: &Path) -> Result<Self> {
        let p = dir.join("meta.txt");
        if !p.is_file() {
            return Err(Error::NotADataset(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Self::parse(&text)
    }
}

pub fn write_dataset(seq: &UltrasoundSequence, labels: &LabelTrack, dir: &Path) -> Result<()> {
    if seq.len() != labels.len() {
        return Err(Error::InconsistentDataset(format!(
            "{} frames but {} labels",
            seq.len(),
            labels.len()
        )));
    }
    let (h, w) = seq.dims();
    if seq.frames.iter().any(|f| f.height() != h || f.width() != w) {
        return Err(Error::InconsistentDataset("frames differ in size".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        version: DATASET_VERSION,
        fps: seq.fps,
        pixel_pitch_mm: seq.pixel_pitch_mm,
        condition: seq.condition,
        participant: seq.participant,
        frames: seq.len(),
        height: h,
        width: w,
    };
    let p = dir.join("meta.txt");
    fs::write(&p, meta.to_text()).map_err(|e| Error::io(&p, e))?;

    let mut bin = Vec::with_capacity(HEADER_LEN + seq.len() * h * w * 4);
    bin.extend_from_slice(FRAMES_MAGIC);
    for v in [DATASET_VERSION, seq.len() as u32, h as u32, w as u32] {
        bin.extend_from_slice(&v.to_le_bytes());
    }
    for f in &seq.frames {
        for &px in f.pixels() {
            bin.extend_from_slice(&(px as f32).to_le_bytes());
        }
    }
    let p = dir.join("frames.bin");
    fs::write(&p, bin).map_err(|e| Error::io(&p, e))?;

    let p = dir.join("labels.csv");
    fs::write(&p, labels.to_csv()).map_err(|e| Error::io(&p, e))?;
    Ok(())
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn read_dataset(dir: &Path) -> Result<(UltrasoundSequence, LabelTrack)> {
    let bin_path = dir.join("frames.bin");
    if !bin_path.is_file() {
        return Err(Error::NotADataset(dir.to_path_buf()));
    }
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() < 4 {
        return Err(Error::CorruptDataset(format!("{} is truncated", bin_path.display())));
    }
    if &bytes[..4] != FRAMES_MAGIC {
        return Err(Error::NotADataset(dir.to_path_buf()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptDataset(format!(
            "{} header is truncated",
            bin_path.display()
        )));
    }
    let version = u32_at(&bytes, 4);
    if version != DATASET_VERSION {
        return Err(Error::CorruptDataset(format!(
            "unsupported frames.bin version {version}"
        )));
    }
    let count = u32_at(&bytes, 8) as usize;
    let h = u32_at(&bytes, 12) as usize;
    let w = u32_at(&bytes, 16) as usize;
    let expected = HEADER_LEN + count * h * w * 4;
    if bytes.len() != expected {
        return Err(Error::CorruptDataset(format!(
            "{}: expected {expected} bytes for {count} frames of {h}x{w}, found {}",
            bin_path.display(),
            bytes.len()
        )));
    }
    let meta = DatasetMeta::read(dir)?;
    if (meta.frames, meta.height, meta.width) != (count, h, w) {
        return Err(Error::InconsistentDataset(format!(
            "meta.txt says {} frames of {}x{}, frames.bin holds {count} of {h}x{w}",
            meta.frames, meta.height, meta.width
        )));
    }

    let mut frames = Vec::with_capacity(count);
    for chunk in bytes[HEADER_LEN..].chunks_exact(h * w * 4) {
        let px = chunk
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().expect("4-byte slice"))))
            .collect();
        frames.push(GrayImage::new(h, w, px)?);
    }

    let lp = dir.join("labels.csv");
    if !lp.is_file() {
        return Err(Error::InconsistentDataset(format!("{} missing", lp.display())));
    }
    let text = fs::read_to_string(&lp).map_err(|e| Error::io(&lp, e))?;
    let labels = LabelTrack::from_csv(&text, meta.fps)?;
    if labels.len() != count {
        return Err(Error::InconsistentDataset(format!(
            "{count} frames but {} label rows",
            labels.len()
        )));
    }
    Ok((
        UltrasoundSequence {
            frames,
            fps: meta.fps,
            pixel_pitch_mm: meta.pixel_pitch_mm,
            participant: meta.participant,
            condition: meta.condition,
        },
        labels,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::signal::Condition;

    fn sample(n: usize) -> (UltrasoundSequence, LabelTrack) {
        let mut rng = SeededRng::new(8);
        let frames = (0..n)
            .map(|_| GrayImage::from_fn(3, 5, |_, _| f64::from(rng.uniform() as f32)))
            .collect();
        let seq = UltrasoundSequence {
            frames,
            fps: 25.0,
            pixel_pitch_mm: 0.1117,
            participant: 4,
            condition: Condition::Passive,
        };
        let vals: Vec<f64> = (0..n).map(|k| k as f64 * 0.1).collect();
        let labels = LabelTrack::from_values(25.0, vals.clone(), vals.clone(), vals).unwrap();
        (seq, labels)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (seq, labels) = sample(11);
        write_dataset(&seq, &labels, dir.path()).unwrap();
        let (s2, l2) = read_dataset(dir.path()).unwrap();
        assert_eq!(s2, seq);
        assert_eq!(l2, labels);
    }

    #[test]
    fn altered_magic_is_not_a_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let (seq, labels) = sample(2);
        write_dataset(&seq, &labels, dir.path()).unwrap();
        let p = dir.path().join("frames.bin");
        let mut b = fs::read(&p).unwrap();
        b[..4].copy_from_slice(b"XXXX");
        fs::write(&p, b).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap_err().kind(), "not-a-dataset");
    }

    #[test]
    fn truncated_frames_are_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let (seq, labels) = sample(3);
        write_dataset(&seq, &labels, dir.path()).unwrap();
        let p = dir.path().join("frames.bin");
        let b = fs::read(&p).unwrap();
        fs::write(&p, &b[..b.len() - 7]).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap_err().kind(), "corrupt-dataset");
        fs::write(&p, &b[..10]).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap_err().kind(), "corrupt-dataset");
    }

    #[test]
    fn label_count_mismatch_is_inconsistent() {
        let dir = tempfile::tempdir().unwrap();
        let (seq, labels) = sample(11);
        write_dataset(&seq, &labels, dir.path()).unwrap();
        let (_, short) = sample(10);
        fs::write(dir.path().join("labels.csv"), short.to_csv()).unwrap();
        assert_eq!(read_dataset(dir.path()).unwrap_err().kind(), "inconsistent-dataset");
    }
}
