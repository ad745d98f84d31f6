use super::{depth_profile, SpeckleTexture};
use crate::numerics::{bilinear_sample, GrayImage, SeededRng};
use crate::signal::{Condition, LabelTrack};
use crate::{Error, Result};

/// Label-to-motion mapping of the synthetic plant.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionGains {
    /// Peak shear (pixels) at one EMG span of activation.
    pub active_px: f64,
    /// Uniform translation (pixels) at one angle span of rotation.
    pub passive_px: f64,
    pub emg_span: f64,
    pub angle_span: f64,
}

impl Default for MotionGains {
    fn default() -> Self {
        Self {
            active_px: 1.0,
            passive_px: 3.0,
            emg_span: 0.0481,
            angle_span: 12.371,
        }
    }
}

impl MotionGains {
    /// Shear and translation coefficients for frame `k`. A condition that
    /// does not drive a channel pins its coefficient to zero, so label noise
    /// on an undriven channel never moves the image.
    pub fn coefficients(&self, labels: &LabelTrack, k: usize, condition: Condition) -> (f64, f64) {
        let alpha = if condition.drives_screen() {
            self.active_px * labels.emg[k] / self.emg_span
        } else {
            0.0
        };
        let beta = if condition.drives_pedal() {
            self.passive_px * labels.angle[k] / self.angle_span
        } else {
            0.0
        };
        (alpha, beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub region_height: usize,
    pub region_width: usize,
    pub fps: f64,
    pub pixel_pitch_mm: f64,
    pub participant: u32,
    pub condition: Condition,
    /// Per-frame additive speckle decorrelation noise (std, intensity units).
    /// Zero disables it.
    pub decorrelation_std: f64,
    pub decorrelation_seed: u64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            region_height: 24,
            region_width: 96,
            fps: 25.0,
            // 496 px span 55.42 mm at full scale
            pixel_pitch_mm: 55.42 / 496.0,
            participant: 0,
            condition: Condition::Combined,
            decorrelation_std: 0.0,
            decorrelation_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UltrasoundSequence {
    pub frames: Vec<GrayImage>,
    pub fps: f64,
    pub pixel_pitch_mm: f64,
    pub participant: u32,
    pub condition: Condition,
}

impl UltrasoundSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), |f| (f.height(), f.width()))
    }
}

/// Warps the texture once per frame by the cumulative field of that frame.
///
/// Frame `k` is the centred region of the texture, backward-warped by the
/// field with coefficients from label `k` (absolute, not chained), sampled
/// bilinearly and stored at 32-bit precision.
pub fn render_sequence(
    texture: &SpeckleTexture,
    labels: &LabelTrack,
    gains: &MotionGains,
    opts: &RenderOptions,
) -> Result<UltrasoundSequence> {
    let canvas = &texture.image;
    let (h, w) = (opts.region_height, opts.region_width);
    if h < 2 || w < 2 || h > canvas.height() || w > canvas.width() {
        return Err(Error::BadDims(format!(
            "region {h}x{w} does not fit canvas {}x{}",
            canvas.height(),
            canvas.width()
        )));
    }
    let x0 = (canvas.width() - w) / 2;
    let y0 = (canvas.height() - h) / 2;
    let margin = x0.min(canvas.width() - w - x0);

    let mut noise_rng = SeededRng::new(opts.decorrelation_seed);
    let profile: Vec<f64> = (0..h).map(|y| depth_profile(y, h)).collect();
    let mut frames = Vec::with_capacity(labels.len());
    for k in 0..labels.len() {
        let (alpha, beta) = gains.coefficients(labels, k, opts.condition);
        let needed = alpha.abs() + beta.abs();
        if !needed.is_finite() || needed > margin as f64 {
            return Err(Error::MotionOutOfCanvas {
                frame: k,
                needed,
                available: margin,
            });
        }
        let mut frame = GrayImage::from_fn(h, w, |x, y| {
            let dx = alpha * profile[y] + beta;
            bilinear_sample(canvas, (x0 + x) as f64 - dx, (y0 + y) as f64)
        });
        if opts.decorrelation_std > 0.0 {
            for p in frame.pixels_mut() {
                *p = (*p + opts.decorrelation_std * noise_rng.gaussian()).clamp(0.0, 1.0);
            }
        }
        for p in frame.pixels_mut() {
            *p = f64::from(*p as f32);
        }
        frames.push(frame);
    }
    Ok(UltrasoundSequence {
        frames,
        fps: opts.fps,
        pixel_pitch_mm: opts.pixel_pitch_mm,
        participant: opts.participant,
        condition: opts.condition,
    })
}
