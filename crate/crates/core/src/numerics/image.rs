use crate::{Error, Result};

/// Single-channel image, row-major.
///
/// Intensities produced by the generators lie in `[0, 1]`; derived images
/// (scaled copies, pyramid levels of scaled copies, decoded network inputs)
/// may leave that range, so the bound is checked by [`GrayImage::in_unit_range`]
/// rather than enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::BadDims(format!("{height}x{width} image")));
        }
        if pixels.len() != height * width {
            return Err(Error::BadDims(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image must be non-empty");
        let mut pixels = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { height, width, pixels }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel lookup with coordinates clamped to the border.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[yc * self.width + xc]
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        bilinear_sample(self, x, y)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.pixels.iter().all(|&p| (0.0..=1.0).contains(&p))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                (lo.min(p), hi.max(p))
            })
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Rectangular crop; the rectangle must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || x0 + width > self.width || y0 + height > self.height {
            return Err(Error::BadDims(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(height, width, |x, y| self.get(x0 + x, y0 + y)))
    }
}

/// Bilinear interpolation with clamp-to-edge borders.
#[inline]
pub fn bilinear_sample(img: &GrayImage, x: f64, y: f64) -> f64 {
    let w = img.width;
    let h = img.height;
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let p = &img.pixels;
    let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
    let bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lattice_points_are_exact() {
        let img = GrayImage::from_fn(5, 4, |x, y| (x * 10 + y) as f64 / 100.0);
        assert_eq!(bilinear_sample(&img, 2.0, 3.0), img.get(2, 3));
    }

    #[test]
    fn midpoint_of_ramp() {
        let img = GrayImage::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.5, 0.5), 0.5);
    }

    #[test]
    fn outside_clamps_to_edge() {
        let img = GrayImage::from_fn(3, 3, |x, y| (x + 3 * y) as f64 / 9.0);
        assert_eq!(bilinear_sample(&img, -1.0, 0.0), img.get(0, 0));
        assert_eq!(bilinear_sample(&img, 7.5, 9.0), img.get(2, 2));
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
    }

    proptest! {
        // A ramp a + b*x + c*y is reproduced exactly by bilinear interpolation
        // anywhere inside the lattice.
        #[test]
        fn exact_on_ramps(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
                          x in 0.0f64..6.0, y in 0.0f64..4.0) {
            let img = GrayImage::from_fn(5, 7, |px, py| a + b * px as f64 + c * py as f64);
            let v = bilinear_sample(&img, x, y);
            prop_assert!((v - (a + b * x + c * y)).abs() < 1e-12);
        }

        #[test]
        fn linear_along_rows(vals in proptest::collection::vec(0.0f64..1.0, 12), t in 0.0f64..1.0, row in 0usize..3) {
            let img = GrayImage::new(3, 4, vals).unwrap();
            let x0 = 1.0;
            let v = bilinear_sample(&img, x0 + t, row as f64);
            let expect = img.get(1, row) * (1.0 - t) + img.get(2, row) * t;
            prop_assert!((v - expect).abs() < 1e-12);
        }
    }
}
