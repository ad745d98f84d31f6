//! Minimal PNG output: line plots and grayscale images.

use std::io::BufWriter;
use std::path::Path;

use crate::numerics::GrayImage;
use crate::{Error, Result};

/// One line of a plot.
pub struct Series<'a> {
    pub values: &'a [f64],
    pub color: [u8; 3],
}

fn encode(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut w = enc.write_header().map_err(to_io)?;
    w.write_image_data(data).map_err(to_io)?;
    w.finish().map_err(to_io)
}

struct Canvas {
    w: usize,
    h: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h {
            let i = 3 * (y as usize * self.w + x as usize);
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn line(&mut self, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put(x0, y0, c);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
}

/// Draws every series over a shared y range, x spanning the longest one.
pub fn line_plot_png(path: &Path, series: &[Series], width: usize, height: usize) -> Result<()> {
    let mut cv = Canvas {
        w: width,
        h: height,
        rgb: vec![255; width * height * 3],
    };
    let finite = series
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (-1.0, 1.0)
    };
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let margin = 4i64;
    let (pw, ph) = (width as i64 - 2 * margin, height as i64 - 2 * margin);
    let n = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
    let px = |i: usize| margin + (i as f64 / (n - 1) as f64 * (pw - 1) as f64).round() as i64;
    let py = |v: f64| margin + ((hi - v) / (hi - lo) * (ph - 1) as f64).round() as i64;

    let frame = [160, 160, 160];
    let (l, r, t, b) = (margin - 1, margin + pw, margin - 1, margin + ph);
    cv.line((l, t), (r, t), frame);
    cv.line((l, b), (r, b), frame);
    cv.line((l, t), (l, b), frame);
    cv.line((r, t), (r, b), frame);
    if lo < 0.0 && hi > 0.0 {
        cv.line((margin, py(0.0)), (margin + pw - 1, py(0.0)), [220, 220, 220]);
    }
    for s in series {
        let mut prev: Option<(i64, i64)> = None;
        for (i, &v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                prev = None;
                continue;
            }
            let p = (px(i), py(v));
            match prev {
                Some(q) => cv.line(q, p, s.color),
                None => cv.put(p.0, p.1, s.color),
            }
            prev = Some(p);
        }
    }
    encode(path, width, height, png::ColorType::Rgb, &cv.rgb)
}

/// Writes an image, stretching its min..max to 0..255.
pub fn gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    let (lo, hi) = img.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let data: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    encode(path, img.width(), img.height(), png::ColorType::Grayscale, &data)
}
