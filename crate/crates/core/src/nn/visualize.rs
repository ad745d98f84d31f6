//! Activation maximization: gradient ascent on the input image.

use super::arch::LayerSpec;
use super::layers::{backward_from, forward};
use super::model::NetworkModel;
use crate::numerics::{SeededRng, Tensor};
use crate::{Error, Result};

/// Which unit(s) of a layer to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitSelector {
    /// One spatial position of one channel (conv or pool layers).
    Site { channel: usize, y: usize, x: usize },
    /// Every position of one channel (conv or pool layers).
    AllSites { channel: usize },
    /// One unit of a fully connected layer; the last layer's units are the
    /// network outputs.
    Unit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentParams {
    pub iters: usize,
    pub rate: f64,
    pub l2: f64,
}

impl Default for AscentParams {
    fn default() -> Self {
        Self {
            iters: 100,
            rate: 0.5,
            l2: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    /// Optimized input in normalized units, shape `[c, h, w]`.
    pub input: Tensor,
    /// Selected activation before each update and after the last one.
    pub trace: Vec<f64>,
}

fn selection_mask(model: &NetworkModel, layer: usize, sel: UnitSelector) -> Result<Vec<f64>> {
    let layers = model.spec.layers();
    if layer >= layers.len() {
        return Err(Error::BadUnit(format!(
            "layer {layer} does not exist ({} layers)",
            layers.len()
        )));
    }
    let s = model.spec.shapes()[layer];
    let mut mask = vec![0.0; s.len()];
    let spatial = !matches!(layers[layer], LayerSpec::FullyConnected { .. });
    match (sel, spatial) {
        (UnitSelector::Site { channel, y, x }, true) if channel < s.c && y < s.h && x < s.w => {
            mask[(channel * s.h + y) * s.w + x] = 1.0;
        }
        (UnitSelector::AllSites { channel }, true) if channel < s.c => {
            mask[channel * s.h * s.w..(channel + 1) * s.h * s.w].fill(1.0);
        }
        (UnitSelector::Unit(u), false) if u < s.c => mask[u] = 1.0,
        _ => {
            return Err(Error::BadUnit(format!(
                "{sel:?} is not a unit of layer {layer} ({:?}, shape {}x{}x{})",
                layers[layer], s.c, s.h, s.w
            )))
        }
    }
    Ok(mask)
}

/// Starts from unit Gaussian noise and repeatedly moves the input along the
/// gradient of the selected activation, with L2 decay.
pub fn maximize_activation(
    model: &NetworkModel,
    layer: usize,
    selector: UnitSelector,
    params: AscentParams,
    rng: &mut SeededRng,
) -> Result<AscentResult> {
    let mask = selection_mask(model, layer, selector)?;
    let s = model.input_shape();
    let mut x: Vec<f64> = (0..s.len()).map(|_| rng.gaussian()).collect();
    let activation = |pre: &[f64]| pre.iter().zip(&mask).map(|(a, m)| a * m).sum::<f64>();
    let mut trace = Vec::with_capacity(params.iters + 1);
    for _ in 0..params.iters {
        let cache = forward(model, &x, None);
        trace.push(activation(&cache.pre[layer]));
        let (_, grad) = backward_from(model, &cache, layer, &mask);
        for (v, g) in x.iter_mut().zip(&grad) {
            *v += params.rate * g - params.l2 * *v;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("activation maximization diverged".into()));
        }
    }
    trace.push(activation(&forward(model, &x, None).pre[layer]));
    Ok(AscentResult {
        input: Tensor::new(vec![s.c, s.h, s.w], x)?,
        trace,
    })
}
