use std::fmt::Write as _;

use super::Schedule;
use crate::numerics::SeededRng;
use crate::{Error, Result};

pub const LABEL_HEADER: &str = "frame,emg,torque,angle,d_emg,d_torque,d_angle";

/// Linear plant turning drive signals into measured labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    /// EMG at full activation, volts.
    pub emg_span: f64,
    /// Torque span, newton-meters.
    pub torque_span: f64,
    /// Joint angle span, degrees.
    pub angle_span: f64,
    /// Fraction of the torque span produced by full activation.
    pub k_active: f64,
    /// Fraction of the torque span produced by full rotation.
    pub k_passive: f64,
    /// Measurement noise std as a fraction of each span.
    pub noise_frac: f64,
    /// Neutral standing before the trial, seconds.
    pub hold_seconds: f64,
    /// Rate the drive signals are generated at before decimation.
    pub signal_rate_hz: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            emg_span: 0.0481,
            torque_span: 100.182,
            angle_span: 12.371,
            k_active: 0.7,
            k_passive: 0.3,
            noise_frac: 0.005,
            hold_seconds: 10.0,
            signal_rate_hz: 1000.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let spans = [
            ("emg_span", self.emg_span),
            ("torque_span", self.torque_span),
            ("angle_span", self.angle_span),
            ("signal_rate_hz", self.signal_rate_hz),
        ];
        for (name, v) in spans {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::BadPlantConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("k_active", self.k_active),
            ("k_passive", self.k_passive),
            ("noise_frac", self.noise_frac),
            ("hold_seconds", self.hold_seconds),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::BadPlantConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-frame labels and their frame-to-frame deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTrack {
    pub fps: f64,
    pub emg: Vec<f64>,
    pub torque: Vec<f64>,
    pub angle: Vec<f64>,
    pub d_emg: Vec<f64>,
    pub d_torque: Vec<f64>,
    pub d_angle: Vec<f64>,
}

fn deltas(xs: &[f64]) -> Vec<f64> {
    let mut d = Vec::with_capacity(xs.len());
    if !xs.is_empty() {
        d.push(0.0);
    }
    d.extend(xs.windows(2).map(|w| w[1] - w[0]));
    d
}

impl LabelTrack {
    /// Builds a track from absolute values, deriving the deltas.
    pub fn from_values(fps: f64, emg: Vec<f64>, torque: Vec<f64>, angle: Vec<f64>) -> Result<Self> {
        if emg.len() != torque.len() || emg.len() != angle.len() {
            return Err(Error::InconsistentDataset(format!(
                "label columns differ in length: {} / {} / {}",
                emg.len(),
                torque.len(),
                angle.len()
            )));
        }
        Ok(Self {
            fps,
            d_emg: deltas(&emg),
            d_torque: deltas(&torque),
            d_angle: deltas(&angle),
            emg,
            torque,
            angle,
        })
    }

    pub fn len(&self) -> usize {
        self.emg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emg.is_empty()
    }

    /// `(d_emg, d_torque, d_angle)` at frame `k`.
    pub fn delta(&self, k: usize) -> [f64; 3] {
        [self.d_emg[k], self.d_torque[k], self.d_angle[k]]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.len() * 80);
        s.push_str(LABEL_HEADER);
        s.push('\n');
        for k in 0..self.len() {
            // `{}` on f64 prints the shortest string that parses back exactly
            let _ = writeln!(
                s,
                "{k},{},{},{},{},{},{}",
                self.emg[k], self.torque[k], self.angle[k], self.d_emg[k], self.d_torque[k], self.d_angle[k]
            );
        }
        s
    }

    pub fn from_csv(text: &str, fps: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == LABEL_HEADER => {}
            _ => return Err(Error::CorruptDataset("labels.csv header mismatch".into())),
        }
        let mut cols: [Vec<f64>; 6] = Default::default();
        for (row, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::CorruptDataset(format!(
                    "labels.csv row {row} has {} fields",
                    fields.len()
                )));
            }
            let idx: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::CorruptDataset(format!("labels.csv row {row}: bad frame index")))?;
            if idx != row {
                return Err(Error::CorruptDataset(format!(
                    "labels.csv row {row} carries frame index {idx}"
                )));
            }
            for (c, f) in cols.iter_mut().zip(&fields[1..]) {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::CorruptDataset(format!("labels.csv row {row}: bad number {f:?}")))?;
                c.push(v);
            }
        }
        let [emg, torque, angle, d_emg, d_torque, d_angle] = cols;
        Ok(Self {
            fps,
            emg,
            torque,
            angle,
            d_emg,
            d_torque,
            d_angle,
        })
    }
}

/// Samples the plant at `fps`.
///
/// The track starts with `plant.hold_seconds` of rest, then runs the
/// schedules. A drive passed as `None` stays at rest (the isometric task has
/// no pedal drive, the passive task no screen drive). Each frame takes the
/// drive sample nearest its timestamp on the `signal_rate_hz` grid.
pub fn make_label_track(
    screen: Option<&Schedule>,
    pedal: Option<&Schedule>,
    duration: f64,
    plant: &PlantConfig,
    fps: f64,
    rng: &mut SeededRng,
) -> Result<LabelTrack> {
    plant.validate()?;
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::BadPlantConfig(format!("fps must be positive, got {fps}")));
    }
    for s in [screen, pedal].into_iter().flatten() {
        if (s.duration() - duration).abs() > 1e-9 {
            return Err(Error::BadPlantConfig(format!(
                "schedule duration {} differs from trial duration {duration}",
                s.duration()
            )));
        }
    }
    let total = plant.hold_seconds + duration;
    let frames = (total * fps).round() as usize;
    let mut emg = Vec::with_capacity(frames);
    let mut torque = Vec::with_capacity(frames);
    let mut angle = Vec::with_capacity(frames);
    let drive = |s: Option<&Schedule>, t: f64| match s {
        Some(s) if t >= 0.0 => s.value_at(t),
        _ => 0.0,
    };
    for k in 0..frames {
        let tick = (k as f64 / fps * plant.signal_rate_hz).round();
        let t = tick / plant.signal_rate_hz - plant.hold_seconds;
        let screen_v = drive(screen, t);
        let pedal_v = drive(pedal, t);

        let e = plant.emg_span * screen_v.max(0.0) + plant.noise_frac * plant.emg_span * rng.gaussian();
        let e = e.max(0.0);
        let a = plant.angle_span * pedal_v + plant.noise_frac * plant.angle_span * rng.gaussian();
        let a = a.clamp(-plant.angle_span, plant.angle_span);
        let tq = plant.k_active * e / plant.emg_span * plant.torque_span
            + plant.k_passive * a / plant.angle_span * plant.torque_span
            + plant.noise_frac * plant.torque_span * rng.gaussian();
        let tq = tq.clamp(-plant.torque_span, plant.torque_span);
        emg.push(e);
        angle.push(a);
        torque.push(tq);
    }
    LabelTrack::from_values(fps, emg, torque, angle)
}
