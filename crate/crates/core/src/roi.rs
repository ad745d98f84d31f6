//! Region-of-interest standardization: fit the muscle's main axis and
//! resample a rectangle aligned with it.

use crate::numerics::{bilinear_sample, GrayImage};
use crate::{Error, Result};

/// Least-squares line `y = slope * x + intercept` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisFit {
    pub slope: f64,
    pub intercept: f64,
    /// `atan(slope)` in degrees, in (-90, 90).
    pub angle_deg: f64,
}

impl AxisFit {
    pub fn horizontal(y: f64) -> Self {
        Self {
            slope: 0.0,
            intercept: y,
            angle_deg: 0.0,
        }
    }
}

/// Ordinary least squares on vertical residuals.
pub fn fit_muscle_axis(points: &[(f64, f64)]) -> Result<AxisFit> {
    let n = points.len() as f64;
    let distinct_x = points.iter().any(|p| points.first().is_some_and(|q| q.0 != p.0));
    if points.len() < 2 || !distinct_x {
        return Err(Error::DegenerateAxis(format!(
            "{} points without two distinct x values",
            points.len()
        )));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(AxisFit {
        slope,
        intercept,
        angle_deg: slope.atan().to_degrees(),
    })
}

/// Mean of the points, the default region centre.
pub fn centroid(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    (sx / n, sy / n)
}

/// Samples an `out_w x out_h` image whose horizontal axis runs along the
/// fitted muscle axis, rotated about `center`.
///
/// Output pixel `(u, v)` sits at offset `(u - out_w / 2, v - out_h / 2)`
/// (integer division) from the centre in the rotated frame, so an unrotated
/// extraction around an integer centre lands exactly on the source lattice.
pub fn extract_standardized_region(
    img: &GrayImage,
    fit: &AxisFit,
    center: (f64, f64),
    out_w: usize,
    out_h: usize,
) -> GrayImage {
    assert!(out_w >= 1 && out_h >= 1, "output region must be non-empty");
    let theta = fit.angle_deg.to_radians();
    let (s, c) = theta.sin_cos();
    let (hx, hy) = ((out_w / 2) as f64, (out_h / 2) as f64);
    GrayImage::from_fn(out_h, out_w, |u, v| {
        let du = u as f64 - hx;
        let dv = v as f64 - hy;
        let x = center.0 + du * c - dv * s;
        let y = center.1 + du * s + dv * c;
        bilinear_sample(img, x, y)
    })
}
