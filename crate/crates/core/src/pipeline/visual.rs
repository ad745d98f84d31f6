//! Activation maximization for frame-pair models, decoded back into a frame
//! pair and read out with the KLT tracker.

use super::frontend::PairEncoding;
use crate::nn::{maximize_activation, AscentParams, AscentResult, NetworkModel, UnitSelector};
use crate::numerics::{GrayImage, SeededRng};
use crate::tracking::{klt_track, select_good_features, FrontEndParams};
use crate::{Error, Result};

/// Optimized frame pair plus the horizontal flow KLT finds in it.
#[derive(Debug, Clone)]
pub struct PairVisualization {
    pub prev: GrayImage,
    pub next: GrayImage,
    pub activation: Vec<f64>,
    /// Mean horizontal displacement of tracked features in the upper and
    /// lower halves of the frame.
    pub top_dx: f64,
    pub bottom_dx: f64,
    pub tracked: usize,
}

impl PairVisualization {
    /// Opposite horizontal motion in the two halves.
    pub fn is_shear(&self) -> bool {
        self.top_dx * self.bottom_dx < 0.0
    }
}

/// Default number of random starts for [`visualize_pair_unit`].
pub const DEFAULT_RESTARTS: usize = 8;

/// Drives `selector` at `layer` of a two-channel model from `restarts` noise
/// inputs, keeps the run that ends with the highest activation, converts it to
/// raw frames and tracks the features of the first frame into the second.
pub fn visualize_pair_unit(
    model: &NetworkModel,
    encoding: PairEncoding,
    layer: usize,
    selector: UnitSelector,
    ascent: AscentParams,
    tracking: &FrontEndParams,
    seed: u64,
    restarts: usize,
) -> Result<PairVisualization> {
    let s = model.input_shape();
    if s.c != 2 {
        return Err(Error::Shape(format!(
            "frame-pair visualization needs a two-channel input, model takes {}x{}x{}",
            s.c, s.h, s.w
        )));
    }
    let root = SeededRng::new(seed).child_named("visualize");
    let mut best: Option<AscentResult> = None;
    for r in 0..restarts.max(1) {
        let run = maximize_activation(model, layer, selector, ascent, &mut root.child(r as u64))?;
        let end = |a: &AscentResult| a.trace[a.trace.len() - 1];
        if best.as_ref().is_none_or(|b| end(&run) > end(b)) {
            best = Some(run);
        }
    }
    let result = best.expect("at least one restart");
    let mut raw = result.input.data().to_vec();
    model.input_norm.invert_in_place(&mut raw);
    let n = s.h * s.w;
    let (mut a, mut b) = encoding.decode(&raw[..n], &raw[n..]);
    // One shared stretch onto [0, 1] keeps the motion and lifts the contrast
    // above the tracker's eigenvalue floor.
    let (lo, hi) = a
        .iter()
        .chain(&b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi - lo).is_finite() || hi - lo <= 0.0 {
        return Err(Error::Numeric("optimized input is flat".into()));
    }
    for v in a.iter_mut().chain(b.iter_mut()) {
        *v = (*v - lo) / (hi - lo);
    }
    let prev = GrayImage::new(s.h, s.w, a)?;
    let next = GrayImage::new(s.h, s.w, b)?;
    let feats = select_good_features(&prev, &tracking.features)?;
    let tracks = klt_track(&prev, &next, &feats, &tracking.klt);
    let half = s.h as f64 / 2.0;
    let (mut top, mut bottom) = ((0.0, 0usize), (0.0, 0usize));
    for (f, t) in feats.iter().zip(&tracks).filter(|(_, t)| t.is_ok()) {
        let acc = if f.y < half { &mut top } else { &mut bottom };
        acc.0 += t.dx;
        acc.1 += 1;
    }
    if top.1 == 0 || bottom.1 == 0 {
        return Err(Error::Numeric(
            "no trackable features in one half of the optimized input".into(),
        ));
    }
    Ok(PairVisualization {
        prev,
        next,
        activation: result.trace,
        top_dx: top.0 / top.1 as f64,
        bottom_dx: bottom.0 / bottom.1 as f64,
        tracked: top.1 + bottom.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{initialize_network, ArchOptions, ArchitectureSpec, InputNorm, Shape3};
    use crate::synth::gen_speckle_texture;

    const H: usize = 32;
    const W: usize = 48;

    /// Linear model whose unit 0 responds to a pair that shears the texture
    /// (top half right, bottom half left) and unit 1 to a pair that moves it
    /// right as a whole.
    fn detector() -> NetworkModel {
        let spec = ArchitectureSpec::from_layer_string("fc-3", Shape3::new(2, H, W), &ArchOptions::default()).unwrap();
        let mut m = initialize_network(&spec, &mut SeededRng::new(3));
        m.input_norm = InputNorm {
            mean: vec![0.5, 0.0],
            std: vec![0.1, 0.01],
        };
        let tex = gen_speckle_texture(H, W, 2.0, &mut SeededRng::new(4)).unwrap().image;
        let n = H * W;
        let w = &mut m.params[0].weights;
        w.fill(0.0);
        for y in 0..H {
            for x in 0..W {
                let i = y * W + x;
                let gx =
                    (tex.get_clamped(x as isize + 1, y as isize) - tex.get_clamped(x as isize - 1, y as isize)) / 2.0;
                let side = if y < H / 2 { 1.0 } else { -1.0 };
                for unit in 0..2 {
                    w[unit * 2 * n + i] = tex.get(x, y) - 0.5;
                }
                w[n + i] = -side * gx;
                w[2 * n + n + i] = -gx;
            }
        }
        m
    }

    fn run(m: &NetworkModel, unit: usize, restarts: usize) -> Result<PairVisualization> {
        let last = m.spec.layers().len() - 1;
        visualize_pair_unit(
            m,
            PairEncoding::Difference,
            last,
            UnitSelector::Unit(unit),
            AscentParams::default(),
            &FrontEndParams::default(),
            5,
            restarts,
        )
    }

    #[test]
    fn needs_two_channels() {
        let spec = ArchitectureSpec::from_layer_string("fc-3", Shape3::new(1, H, W), &ArchOptions::default()).unwrap();
        let m = initialize_network(&spec, &mut SeededRng::new(1));
        assert_eq!(run(&m, 0, 1).unwrap_err().kind(), "shape-error");
    }

    #[test]
    fn reads_shear_and_translation_back() {
        let m = detector();
        let shear = run(&m, 0, 1).unwrap();
        assert!(shear.is_shear(), "{} {}", shear.top_dx, shear.bottom_dx);
        assert!(shear.top_dx > 0.0);
        let shift = run(&m, 1, 1).unwrap();
        assert!(!shift.is_shear(), "{} {}", shift.top_dx, shift.bottom_dx);
        assert!(shift.top_dx > 0.0);
        assert!(shift
            .prev
            .pixels()
            .iter()
            .chain(shift.next.pixels())
            .all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn keeps_the_strongest_restart() {
        let m = detector();
        let end = |v: &PairVisualization| *v.activation.last().unwrap();
        let one = run(&m, 0, 1).unwrap();
        let many = run(&m, 0, 6).unwrap();
        assert!(end(&many) >= end(&one));
        assert_eq!(end(&run(&m, 0, 6).unwrap()), end(&many));
    }
}
