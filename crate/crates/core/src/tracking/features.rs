use crate::numerics::GrayImage;
use crate::{Error, Result};

/// Corner candidate; `score` is the smaller structure-tensor eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Per-pixel corner scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub scores: Vec<f64>,
}

impl ScoreMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[y * self.width + x]
    }
}

/// Central-difference gradients `(Ix, Iy)` with clamped borders.
pub fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (img.height(), img.width());
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            gx[y * w + x] = 0.5 * (img.get_clamped(xi + 1, yi) - img.get_clamped(xi - 1, yi));
            gy[y * w + x] = 0.5 * (img.get_clamped(xi, yi + 1) - img.get_clamped(xi, yi - 1));
        }
    }
    (gx, gy)
}

/// Smaller eigenvalue of the box-summed structure tensor at every pixel.
/// Pixels closer than half a window to the border score 0.
pub fn min_eigenvalue_map(img: &GrayImage, window: usize) -> Result<ScoreMap> {
    let (h, w) = (img.height(), img.width());
    if window < 3 || window % 2 == 0 {
        return Err(Error::BadWindow(format!("window {window} must be odd and >= 3")));
    }
    if window > h || window > w {
        return Err(Error::BadWindow(format!("window {window} exceeds {h}x{w} image")));
    }
    let (gx, gy) = gradients(img);
    // summed-area tables of the three tensor products
    let stride = w + 1;
    let mut sxx = vec![0.0; (h + 1) * stride];
    let mut sxy = vec![0.0; (h + 1) * stride];
    let mut syy = vec![0.0; (h + 1) * stride];
    for y in 0..h {
        let (mut rxx, mut rxy, mut ryy) = (0.0, 0.0, 0.0);
        for x in 0..w {
            let (a, b) = (gx[y * w + x], gy[y * w + x]);
            rxx += a * a;
            rxy += a * b;
            ryy += b * b;
            let i = (y + 1) * stride + x + 1;
            sxx[i] = sxx[i - stride] + rxx;
            sxy[i] = sxy[i - stride] + rxy;
            syy[i] = syy[i - stride] + ryy;
        }
    }
    let boxsum = |t: &[f64], x0: usize, y0: usize, x1: usize, y1: usize| {
        t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0]
    };
    let r = window / 2;
    let mut scores = vec![0.0; h * w];
    for y in r..h - r {
        for x in r..w - r {
            let (x0, y0, x1, y1) = (x - r, y - r, x + r + 1, y + r + 1);
            let a = boxsum(&sxx, x0, y0, x1, y1);
            let b = boxsum(&sxy, x0, y0, x1, y1);
            let c = boxsum(&syy, x0, y0, x1, y1);
            let half_trace = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            scores[y * w + x] = (half_trace - disc).max(0.0);
        }
    }
    Ok(ScoreMap {
        height: h,
        width: w,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureParams {
    pub max_features: usize,
    /// Minimum spacing between accepted features, pixels.
    pub min_distance: f64,
    /// Structure-tensor window, odd.
    pub block_size: usize,
    /// Candidates below this fraction of the best score are dropped.
    pub quality_level: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            max_features: 1000,
            min_distance: 2.0,
            block_size: 3,
            quality_level: 0.01,
        }
    }
}

/// Greedy Shi-Tomasi selection: local maxima of the score map above the
/// quality threshold, strongest first, rejecting anything within
/// `min_distance` of an accepted feature.
pub fn select_good_features(img: &GrayImage, params: &FeatureParams) -> Result<Vec<Feature>> {
    assert!(params.max_features >= 1, "max_features must be >= 1");
    let map = min_eigenvalue_map(img, params.block_size)?;
    let (h, w) = (map.height, map.width);
    let best = map.scores.iter().cloned().fold(0.0, f64::max);
    if best <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = best * params.quality_level;
    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let s = map.get(x, y);
            if s <= threshold || s <= 0.0 {
                continue;
            }
            // 3x3 non-maximum suppression; ties resolved toward the first pixel in scan order
            let mut is_max = true;
            'nb: for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let o = map.get(nx, ny);
                    if o > s || (o == s && (ny, nx) < (y, x)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push(Feature {
                    x: x as f64,
                    y: y as f64,
                    score: s,
                });
            }
        }
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score));

    let min_d2 = params.min_distance * params.min_distance;
    let mut accepted: Vec<Feature> = Vec::new();
    // coarse grid to keep the distance test local
    let cell = params.min_distance.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); gw * gh];
    for cand in candidates {
        let cx = (cand.x / cell) as usize;
        let cy = (cand.y / cell) as usize;
        let mut ok = true;
        'scan: for gy in cy.saturating_sub(1)..=(cy + 1).min(gh - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(gw - 1) {
                for &i in &grid[gy * gw + gx] {
                    let f: &Feature = &accepted[i];
                    let d2 = (f.x - cand.x).powi(2) + (f.y - cand.y).powi(2);
                    if d2 < min_d2 {
                        ok = false;
                        break 'scan;
                    }
                }
            }
        }
        if ok {
            grid[cy * gw + cx].push(accepted.len());
            accepted.push(cand);
            if accepted.len() == params.max_features {
                break;
            }
        }
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::synth::gen_speckle_texture;

    fn corner_image() -> GrayImage {
        // bright quadrant with its corner at (10, 12), slightly smoothed edges
        GrayImage::from_fn(24, 24, |x, y| if x >= 10 && y >= 12 { 1.0 } else { 0.0 })
    }

    #[test]
    fn uniform_scores_zero() {
        let img = GrayImage::filled(16, 16, 0.4);
        let m = min_eigenvalue_map(&img, 3).unwrap();
        assert!(m.scores.iter().all(|&s| s == 0.0));
        assert!(select_good_features(&img, &FeatureParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn vertical_edge_has_rank_one_tensor() {
        let img = GrayImage::from_fn(16, 16, |x, _| if x >= 8 { 1.0 } else { 0.0 });
        let m = min_eigenvalue_map(&img, 5).unwrap();
        for y in 2..14 {
            for x in 2..14 {
                assert!(m.get(x, y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn corner_scores_peak_at_corner() {
        let m = min_eigenvalue_map(&corner_image(), 3).unwrap();
        let (mut bx, mut by, mut best) = (0, 0, -1.0);
        for y in 0..24 {
            for x in 0..24 {
                if m.get(x, y) > best {
                    best = m.get(x, y);
                    bx = x;
                    by = y;
                }
            }
        }
        assert!(best > 0.0);
        assert!(
            (bx as isize - 10).abs() <= 1 && (by as isize - 12).abs() <= 1,
            "peak at ({bx},{by})"
        );
    }

    #[test]
    fn isolated_corner_yields_one_feature() {
        let params = FeatureParams {
            min_distance: 5.0,
            ..Default::default()
        };
        let f = select_good_features(&corner_image(), &params).unwrap();
        assert_eq!(f.len(), 1, "{f:?}");
        assert!((f[0].x - 10.0).abs() <= 1.0 && (f[0].y - 12.0).abs() <= 1.0);
    }

    #[test]
    fn window_validation() {
        let img = GrayImage::filled(8, 8, 0.0);
        assert_eq!(min_eigenvalue_map(&img, 4).unwrap_err().kind(), "bad-window");
        assert_eq!(min_eigenvalue_map(&img, 9).unwrap_err().kind(), "bad-window");
    }

    #[test]
    fn selection_respects_spacing_and_order() {
        let img = gen_speckle_texture(64, 96, 1.5, &mut SeededRng::new(3)).unwrap().image;
        let params = FeatureParams {
            max_features: 150,
            min_distance: 4.0,
            ..Default::default()
        };
        let f = select_good_features(&img, &params).unwrap();
        assert!(!f.is_empty() && f.len() <= 150);
        for w in f.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
        for (i, a) in f.iter().enumerate() {
            assert!(a.score >= 0.0);
            assert!(a.x >= 0.0 && a.y >= 0.0 && a.x < 96.0 && a.y < 64.0);
            for b in &f[i + 1..] {
                assert!((a.x - b.x).hypot(a.y - b.y) >= 4.0);
            }
        }
    }
}
