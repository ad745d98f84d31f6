use crate::numerics::{GrayImage, SeededRng};
use crate::{Error, Result};

/// Oversized speckle canvas that sequences are warped out of.
#[derive(Debug, Clone)]
pub struct SpeckleTexture {
    pub image: GrayImage,
    pub seed: u64,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let (h, w) = (img.height(), img.width());
    let horiz = GrayImage::from_fn(h, w, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * img.get_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    GrayImage::from_fn(h, w, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * horiz.get_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}

/// Band-limited speckle with a few brighter horizontal striations.
///
/// Two independent white fields are blurred at the grain scale and combined
/// as an envelope (Rayleigh-like, as for coherent imaging), log-compressed,
/// striated, then min-max stretched to `[0, 1]`.
pub fn gen_speckle_texture(h: usize, w: usize, grain: f64, rng: &mut SeededRng) -> Result<SpeckleTexture> {
    if h < 32 || w < 32 {
        return Err(Error::BadDims(format!("texture {h}x{w} is smaller than 32x32")));
    }
    if !(grain >= 1.0) {
        return Err(Error::BadDims(format!("grain {grain} must be >= 1 pixel")));
    }
    let seed = rng.seed();
    let mut white = || GrayImage::from_fn(h, w, |_, _| rng.gaussian());
    let re = gaussian_blur(&white(), grain);
    let im = gaussian_blur(&white(), grain);
    let envelope: Vec<f64> = re
        .pixels()
        .iter()
        .zip(im.pixels())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let scale = envelope.iter().sum::<f64>() / envelope.len() as f64;
    let mut img = GrayImage::new(h, w, envelope.iter().map(|e| (1.0 + 4.0 * e / scale).ln()).collect())?;

    // fascicle-like striations
    let bands = 3 + rng.below(3);
    let mut rows = vec![0.0; h];
    for _ in 0..bands {
        let centre = rng.uniform() * h as f64;
        let width = grain * (1.5 + rng.uniform());
        let amp = 0.3 + 0.3 * rng.uniform();
        for (y, r) in rows.iter_mut().enumerate() {
            let d = (y as f64 - centre) / width;
            *r += amp * (-0.5 * d * d).exp();
        }
    }
    for y in 0..h {
        for x in 0..w {
            let v = img.get(x, y) * (1.0 + rows[y]);
            img.set(x, y, v);
        }
    }

    let (lo, hi) = img.min_max();
    let img = img.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0));
    Ok(SpeckleTexture { image: img, seed })
}
