use super::{gradients, Feature};
use crate::numerics::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct KltParams {
    /// Integration window side, odd (typically 11, 15 or 19).
    pub window: usize,
    /// Pyramid depth including the full-resolution level.
    pub pyramid_levels: usize,
    pub max_iters: usize,
    /// Stop iterating once the update is shorter than this, pixels.
    pub eps: f64,
    /// Features whose window-normalized minimum eigenvalue falls below this
    /// are reported lost.
    pub min_eigen: f64,
}

impl Default for KltParams {
    fn default() -> Self {
        Self {
            window: 15,
            pyramid_levels: 3,
            max_iters: 30,
            eps: 0.01,
            min_eigen: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Ok,
    /// Near-singular normal equations.
    Degenerate,
    /// The solution left the image.
    OutOfBounds,
}

/// Displacement of one feature from the previous frame to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub dx: f64,
    pub dy: f64,
    pub status: TrackStatus,
}

impl Track {
    pub fn is_ok(&self) -> bool {
        self.status == TrackStatus::Ok
    }
}

fn pyr_down(img: &GrayImage) -> GrayImage {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (h, w) = (img.height(), img.width());
    let horiz = GrayImage::from_fn(h, w, |x, y| {
        K.iter()
            .enumerate()
            .map(|(i, k)| k * img.get_clamped(x as isize + i as isize - 2, y as isize))
            .sum()
    });
    let (h2, w2) = (h.div_ceil(2), w.div_ceil(2));
    GrayImage::from_fn(h2, w2, |x, y| {
        K.iter()
            .enumerate()
            .map(|(i, k)| k * horiz.get_clamped(2 * x as isize, 2 * y as isize + i as isize - 2))
            .sum()
    })
}

/// Gaussian pyramid, finest level first. Stops early once a level would
/// drop below 4 pixels on a side.
pub fn build_pyramid(img: &GrayImage, levels: usize) -> Vec<GrayImage> {
    let mut pyr = vec![img.clone()];
    while pyr.len() < levels.max(1) {
        let top = pyr.last().expect("non-empty");
        if top.height() < 8 || top.width() < 8 {
            break;
        }
        pyr.push(pyr_down(top));
    }
    pyr
}

struct Level {
    prev: GrayImage,
    next: GrayImage,
    gx: GrayImage,
    gy: GrayImage,
}

/// Pyramidal Lucas-Kanade: tracks each feature of `prev` into `next`,
/// coarse to fine, iterating the 2x2 normal equations at every level.
pub fn klt_track(prev: &GrayImage, next: &GrayImage, feats: &[Feature], params: &KltParams) -> Vec<Track> {
    if feats.is_empty() {
        return Vec::new();
    }
    assert_eq!(
        (prev.height(), prev.width()),
        (next.height(), next.width()),
        "frames must share dimensions"
    );
    assert!(
        params.window >= 3 && params.window % 2 == 1,
        "KLT window must be odd and >= 3"
    );
    let pp = build_pyramid(prev, params.pyramid_levels);
    let np = build_pyramid(next, pp.len());
    let levels: Vec<Level> = pp
        .into_iter()
        .zip(np)
        .map(|(p, n)| {
            let (gx, gy) = gradients(&p);
            let (h, w) = (p.height(), p.width());
            Level {
                gx: GrayImage::new(h, w, gx).expect("gradient dims"),
                gy: GrayImage::new(h, w, gy).expect("gradient dims"),
                prev: p,
                next: n,
            }
        })
        .collect();
    feats.iter().map(|f| track_one(f.x, f.y, &levels, params)).collect()
}

/// Samples the `(2r+1)^2` window centred on `(cx, cy)` row by row. Every
/// sample shares one set of bilinear weights; indices are clamped to the
/// edge, which matches [`crate::numerics::bilinear_sample`] on the border.
fn sample_window(img: &GrayImage, cx: f64, cy: f64, r: isize, out: &mut [f64]) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let (fx0, fy0) = (cx.floor(), cy.floor());
    let (x0, y0) = (fx0 as isize - r, fy0 as isize - r);
    let (fx, fy) = (cx - fx0, cy - fy0);
    let p = img.pixels();
    let side = (2 * r + 1) as usize;
    let cl = |v: isize, n: isize| v.clamp(0, n - 1) as usize;
    let interior = x0 >= 0 && x0 + (side as isize) < w;
    for (jj, row) in out.chunks_exact_mut(side).enumerate() {
        let ya = cl(y0 + jj as isize, h) * w as usize;
        let yb = cl(y0 + jj as isize + 1, h) * w as usize;
        if interior {
            let top = &p[ya + x0 as usize..ya + x0 as usize + side + 1];
            let bot = &p[yb + x0 as usize..yb + x0 as usize + side + 1];
            for (kk, o) in row.iter_mut().enumerate() {
                let t = top[kk] * (1.0 - fx) + top[kk + 1] * fx;
                let b = bot[kk] * (1.0 - fx) + bot[kk + 1] * fx;
                *o = t * (1.0 - fy) + b * fy;
            }
        } else {
            for (kk, o) in row.iter_mut().enumerate() {
                let xa = cl(x0 + kk as isize, w);
                let xb = cl(x0 + kk as isize + 1, w);
                let t = p[ya + xa] * (1.0 - fx) + p[ya + xb] * fx;
                let b = p[yb + xa] * (1.0 - fx) + p[yb + xb] * fx;
                *o = t * (1.0 - fy) + b * fy;
            }
        }
    }
}

fn track_one(x: f64, y: f64, levels: &[Level], params: &KltParams) -> Track {
    let r = (params.window / 2) as isize;
    let n = params.window * params.window;
    let mut tmpl = vec![0.0; n];
    let mut tgx = vec![0.0; n];
    let mut tgy = vec![0.0; n];
    let mut warped = vec![0.0; n];
    let mut guess = (0.0f64, 0.0f64);
    let mut status = TrackStatus::Ok;

    for (li, lv) in levels.iter().enumerate().rev() {
        let scale = (1u64 << li) as f64;
        let (px, py) = (x / scale, y / scale);
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        sample_window(&lv.gx, px, py, r, &mut tgx);
        sample_window(&lv.gy, px, py, r, &mut tgy);
        sample_window(&lv.prev, px, py, r, &mut tmpl);
        for (a, b) in tgx.iter().zip(&tgy) {
            gxx += a * a;
            gxy += a * b;
            gyy += b * b;
        }
        let half_trace = 0.5 * (gxx + gyy);
        let min_eig = half_trace - (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt();
        let det = gxx * gyy - gxy * gxy;
        if min_eig / (n as f64) < params.min_eigen || det <= 0.0 {
            status = TrackStatus::Degenerate;
            break;
        }

        let mut nu = (0.0f64, 0.0f64);
        for _ in 0..params.max_iters {
            let (ox, oy) = (px + guess.0 + nu.0, py + guess.1 + nu.1);
            sample_window(&lv.next, ox, oy, r, &mut warped);
            let (mut bx, mut by) = (0.0, 0.0);
            for i in 0..n {
                let diff = tmpl[i] - warped[i];
                bx += diff * tgx[i];
                by += diff * tgy[i];
            }
            let ex = (gyy * bx - gxy * by) / det;
            let ey = (gxx * by - gxy * bx) / det;
            nu.0 += ex;
            nu.1 += ey;
            if !nu.0.is_finite() || !nu.1.is_finite() {
                break;
            }
            if ex.hypot(ey) < params.eps {
                break;
            }
        }
        guess = (guess.0 + nu.0, guess.1 + nu.1);
        if li > 0 {
            guess = (2.0 * guess.0, 2.0 * guess.1);
        }
    }

    let (dx, dy) = guess;
    if status == TrackStatus::Ok {
        let (w, h) = (levels[0].prev.width() as f64, levels[0].prev.height() as f64);
        let (nx, ny) = (x + dx, y + dy);
        if !nx.is_finite() || !ny.is_finite() || nx < 0.0 || ny < 0.0 || nx > w - 1.0 || ny > h - 1.0 {
            status = TrackStatus::OutOfBounds;
        }
    }
    match status {
        TrackStatus::Ok => Track { dx, dy, status },
        _ => Track {
            dx: 0.0,
            dy: 0.0,
            status,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::synth::gen_speckle_texture;
    use crate::tracking::{select_good_features, FeatureParams};

    fn shifted_pair(shift: f64) -> (GrayImage, GrayImage) {
        let tex = gen_speckle_texture(96, 128, 2.0, &mut SeededRng::new(21))
            .unwrap()
            .image;
        let prev = tex.crop(16, 16, 96, 64).unwrap();
        let next = GrayImage::from_fn(64, 96, |x, y| tex.sample(16.0 + x as f64 - shift, 16.0 + y as f64));
        (prev, next)
    }

    fn interior(f: &[Feature], margin: f64) -> Vec<Feature> {
        f.iter()
            .copied()
            .filter(|p| p.x >= margin && p.x <= 95.0 - margin && p.y >= margin && p.y <= 63.0 - margin)
            .collect()
    }

    #[test]
    fn identical_frames_give_zero_motion() {
        let (prev, _) = shifted_pair(0.0);
        let feats = select_good_features(&prev, &FeatureParams::default()).unwrap();
        let t = klt_track(&prev, &prev, &feats, &KltParams::default());
        assert_eq!(t.len(), feats.len());
        for tr in t.iter().filter(|t| t.is_ok()) {
            assert!(tr.dx.abs() < 1e-9 && tr.dy.abs() < 1e-9);
        }
    }

    #[test]
    fn integer_shift_recovered() {
        let (prev, next) = shifted_pair(3.0);
        let feats = interior(&select_good_features(&prev, &FeatureParams::default()).unwrap(), 12.0);
        let t = klt_track(&prev, &next, &feats, &KltParams::default());
        let ok: Vec<&Track> = t.iter().filter(|t| t.is_ok()).collect();
        assert!(ok.len() * 10 >= feats.len() * 9);
        for tr in ok {
            assert!((tr.dx - 3.0).abs() < 0.1, "dx {}", tr.dx);
            assert!(tr.dy.abs() < 0.1);
        }
    }

    #[test]
    fn scale_equivariant() {
        let (prev, next) = shifted_pair(1.3);
        let feats = interior(&select_good_features(&prev, &FeatureParams::default()).unwrap(), 10.0);
        let base = klt_track(&prev, &next, &feats, &KltParams::default());
        for c in [0.5, 2.0] {
            let t = klt_track(
                &prev.map(|p| c * p),
                &next.map(|p| c * p),
                &feats,
                &KltParams::default(),
            );
            for (a, b) in base.iter().zip(&t) {
                if a.is_ok() && b.is_ok() {
                    assert!((a.dx - b.dx).abs() < 1e-6 && (a.dy - b.dy).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn flat_patch_is_lost() {
        let img = GrayImage::filled(32, 32, 0.5);
        let t = klt_track(
            &img,
            &img,
            &[Feature {
                x: 16.0,
                y: 16.0,
                score: 0.0,
            }],
            &KltParams::default(),
        );
        assert_eq!(t[0].status, TrackStatus::Degenerate);
        assert!(klt_track(&img, &img, &[], &KltParams::default()).is_empty());
    }

    #[test]
    fn pyramid_halves_dims() {
        let img = GrayImage::filled(33, 64, 0.2);
        let p = build_pyramid(&img, 4);
        let dims: Vec<(usize, usize)> = p.iter().map(|l| (l.height(), l.width())).collect();
        assert_eq!(dims, vec![(33, 64), (17, 32), (9, 16), (5, 8)]);
    }
}
