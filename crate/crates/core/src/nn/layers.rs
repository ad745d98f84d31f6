//! Forward and backward passes. Tensors are flat CHW buffers; convolution is
//! "valid" with stride 1, pooling is non-overlapping with floor semantics.

use super::arch::{LayerSpec, Shape3};
use super::model::{LayerParams, NetworkModel};
use crate::numerics::SeededRng;

/// Inverted dropout on the inputs of the top `depth` weighted layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    pub depth: usize,
}

impl Dropout {
    /// Layer indices whose inputs get masked. The first layer never does,
    /// since its input is the raw data.
    pub fn masked_layers(&self, model: &NetworkModel) -> Vec<usize> {
        if self.rate <= 0.0 {
            return Vec::new();
        }
        model
            .spec
            .weighted_layers()
            .into_iter()
            .rev()
            .take(self.depth)
            .filter(|&i| i > 0)
            .collect()
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of each layer (after any dropout mask).
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer (equal to the output for pooling).
    pub pre: Vec<Vec<f64>>,
    /// Output of each layer.
    pub outputs: Vec<Vec<f64>>,
    pub masks: Vec<Option<Vec<f64>>>,
    pub argmax: Vec<Vec<usize>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn conv_forward(x: &[f64], s: Shape3, filters: usize, kh: usize, kw: usize, p: &LayerParams) -> Vec<f64> {
    let (oh, ow) = (s.h - kh + 1, s.w - kw + 1);
    let mut out = vec![0.0; filters * oh * ow];
    for f in 0..filters {
        let o = &mut out[f * oh * ow..(f + 1) * oh * ow];
        o.iter_mut().for_each(|v| *v = p.biases[f]);
        for c in 0..s.c {
            let plane = &x[c * s.h * s.w..(c + 1) * s.h * s.w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let w = p.weights[((f * s.c + c) * kh + ky) * kw + kx];
                    if w == 0.0 {
                        continue;
                    }
                    for y in 0..oh {
                        let src = &plane[(y + ky) * s.w + kx..(y + ky) * s.w + kx + ow];
                        let dst = &mut o[y * ow..(y + 1) * ow];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += w * v;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward(
    x: &[f64],
    s: Shape3,
    filters: usize,
    kh: usize,
    kw: usize,
    p: &LayerParams,
    dz: &[f64],
    grad: &mut LayerParams,
    want_dx: bool,
) -> Vec<f64> {
    let (oh, ow) = (s.h - kh + 1, s.w - kw + 1);
    let mut dx = if want_dx { vec![0.0; x.len()] } else { Vec::new() };
    for f in 0..filters {
        let g = &dz[f * oh * ow..(f + 1) * oh * ow];
        grad.biases[f] += g.iter().sum::<f64>();
        for c in 0..s.c {
            let plane = &x[c * s.h * s.w..(c + 1) * s.h * s.w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wi = ((f * s.c + c) * kh + ky) * kw + kx;
                    let w = p.weights[wi];
                    let mut acc = 0.0;
                    for y in 0..oh {
                        let row = (y + ky) * s.w + kx;
                        let gr = &g[y * ow..(y + 1) * ow];
                        for (gv, xv) in gr.iter().zip(&plane[row..row + ow]) {
                            acc += gv * xv;
                        }
                        if want_dx {
                            let dst = &mut dx[c * s.h * s.w + row..c * s.h * s.w + row + ow];
                            for (d, gv) in dst.iter_mut().zip(gr) {
                                *d += w * gv;
                            }
                        }
                    }
                    grad.weights[wi] += acc;
                }
            }
        }
    }
    dx
}

fn pool_forward(x: &[f64], s: Shape3, ph: usize, pw: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (s.h / ph, s.w / pw);
    let mut out = Vec::with_capacity(s.c * oh * ow);
    let mut arg = Vec::with_capacity(s.c * oh * ow);
    for c in 0..s.c {
        for y in 0..oh {
            for xo in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut bi = 0;
                for dy in 0..ph {
                    for dx in 0..pw {
                        let i = c * s.h * s.w + (y * ph + dy) * s.w + xo * pw + dx;
                        if x[i] > best {
                            best = x[i];
                            bi = i;
                        }
                    }
                }
                out.push(best);
                arg.push(bi);
            }
        }
    }
    (out, arg)
}

fn fc_forward(x: &[f64], units: usize, p: &LayerParams) -> Vec<f64> {
    let n = x.len();
    (0..units)
        .map(|u| {
            let row = &p.weights[u * n..(u + 1) * n];
            p.biases[u] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

/// Runs the network on an already normalized input.
pub fn forward(model: &NetworkModel, input: &[f64], dropout: Option<(Dropout, &mut SeededRng)>) -> ForwardCache {
    let layers = model.spec.layers();
    let n = layers.len();
    let masked = match &dropout {
        Some((d, _)) => d.masked_layers(model),
        None => Vec::new(),
    };
    let mut rng = dropout.map(|(d, r)| (d.rate, r));
    let mut cache = ForwardCache {
        inputs: Vec::with_capacity(n),
        pre: Vec::with_capacity(n),
        outputs: Vec::with_capacity(n),
        masks: Vec::with_capacity(n),
        argmax: Vec::with_capacity(n),
    };
    let mut x = input.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let s = model.spec.input_shape_of(i);
        let mut mask = None;
        if masked.contains(&i) {
            if let Some((rate, r)) = rng.as_mut() {
                let keep = 1.0 - *rate;
                let m: Vec<f64> = (0..x.len())
                    .map(|_| if r.uniform() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                x.iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                mask = Some(m);
            }
        }
        let last = i + 1 == n;
        let (pre, out, arg) = match *layer {
            LayerSpec::Conv {
                filters,
                kernel_h,
                kernel_w,
            } => {
                let z = conv_forward(&x, s, filters, kernel_h, kernel_w, &model.params[i]);
                let mut a = z.clone();
                relu_in_place(&mut a);
                (z, a, Vec::new())
            }
            LayerSpec::MaxPool { h, w } => {
                let (o, a) = pool_forward(&x, s, h, w);
                (o.clone(), o, a)
            }
            LayerSpec::FullyConnected { units } => {
                let z = fc_forward(&x, units, &model.params[i]);
                let mut a = z.clone();
                if !last {
                    relu_in_place(&mut a);
                }
                (z, a, Vec::new())
            }
        };
        cache.inputs.push(std::mem::take(&mut x));
        x = out.clone();
        cache.pre.push(pre);
        cache.outputs.push(out);
        cache.masks.push(mask);
        cache.argmax.push(arg);
    }
    cache
}

/// Prediction in normalized target units for a normalized input.
pub fn predict_normalized(model: &NetworkModel, input: &[f64]) -> Vec<f64> {
    forward(model, input, None).output().to_vec()
}

/// Backpropagates `d_pre`, the gradient with respect to the pre-activation
/// of layer `from` (the output itself for pooling layers), down to the
/// network input. Returns parameter gradients and the input gradient.
pub fn backward_from(
    model: &NetworkModel,
    cache: &ForwardCache,
    from: usize,
    d_pre: &[f64],
) -> (Vec<LayerParams>, Vec<f64>) {
    let mut grads: Vec<LayerParams> = model
        .params
        .iter()
        .map(|p| LayerParams::zeros(p.weights.len(), p.biases.len()))
        .collect();
    let mut dz = d_pre.to_vec();
    for i in (0..=from).rev() {
        let s = model.spec.input_shape_of(i);
        let x = &cache.inputs[i];
        let mut dx = match model.layer(i) {
            LayerSpec::Conv {
                filters,
                kernel_h,
                kernel_w,
            } => conv_backward(
                x,
                s,
                filters,
                kernel_h,
                kernel_w,
                &model.params[i],
                &dz,
                &mut grads[i],
                true,
            ),
            LayerSpec::MaxPool { .. } => {
                let mut dx = vec![0.0; x.len()];
                for (g, &a) in dz.iter().zip(&cache.argmax[i]) {
                    dx[a] += g;
                }
                dx
            }
            LayerSpec::FullyConnected { units } => {
                let n = x.len();
                let p = &model.params[i];
                let g = &mut grads[i];
                let mut dx = vec![0.0; n];
                for u in 0..units {
                    let d = dz[u];
                    g.biases[u] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let row = &p.weights[u * n..(u + 1) * n];
                    let grow = &mut g.weights[u * n..(u + 1) * n];
                    for k in 0..n {
                        grow[k] += d * x[k];
                        dx[k] += d * row[k];
                    }
                }
                dx
            }
        };
        if let Some(m) = &cache.masks[i] {
            dx.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
        }
        if i > 0 {
            // dx is the gradient of layer i-1's output; move it to that
            // layer's pre-activation.
            if matches!(
                model.layer(i - 1),
                LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. }
            ) {
                for (d, z) in dx.iter_mut().zip(&cache.pre[i - 1]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        dz = dx;
    }
    (grads, dz)
}

/// Mean squared error over the outputs and its gradient at the output.
pub fn mse_and_grad(output: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = output.len() as f64;
    let mut loss = 0.0;
    let grad = output
        .iter()
        .zip(target)
        .map(|(o, t)| {
            let e = o - t;
            loss += e * e;
            2.0 * e / n
        })
        .collect();
    (loss / n, grad)
}

/// Loss and parameter gradients for one normalized sample.
pub fn loss_and_gradients(
    model: &NetworkModel,
    input: &[f64],
    target: &[f64],
    dropout: Option<(Dropout, &mut SeededRng)>,
) -> (f64, Vec<LayerParams>) {
    let cache = forward(model, input, dropout);
    let (loss, d) = mse_and_grad(cache.output(), target);
    let (g, _) = backward_from(model, &cache, model.spec.layers().len() - 1, &d);
    (loss, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::{ArchOptions, ArchitectureSpec};
    use crate::nn::model::initialize_network;

    fn net(text: &str, input: Shape3, hidden: (usize, usize), seed: u64) -> NetworkModel {
        let opts = ArchOptions {
            hidden_kernel: hidden,
            ..ArchOptions::default()
        };
        let spec = ArchitectureSpec::from_layer_string(text, input, &opts).unwrap();
        let mut m = initialize_network(&spec, &mut SeededRng::new(seed));
        // Non-zero biases so the check also exercises them.
        let mut r = SeededRng::new(seed + 100);
        for p in &mut m.params {
            p.biases.iter_mut().for_each(|b| *b = 0.1 * r.gaussian());
        }
        m
    }

    fn loss(m: &NetworkModel, x: &[f64], t: &[f64]) -> f64 {
        mse_and_grad(forward(m, x, None).output(), t).0
    }

    fn param(m: &mut NetworkModel, layer: usize, which: usize, k: usize) -> &mut f64 {
        let p = &mut m.params[layer];
        if which == 0 {
            &mut p.weights[k]
        } else {
            &mut p.biases[k]
        }
    }

    fn finite_difference_check(m: &mut NetworkModel, x: &[f64], t: &[f64]) -> usize {
        let eps = 1e-3;
        let (_, g) = loss_and_gradients(m, x, t, None);
        let mut checked = 0;
        for li in 0..m.params.len() {
            for which in 0..2 {
                let len = if which == 0 {
                    m.params[li].weights.len()
                } else {
                    m.params[li].biases.len()
                };
                for k in 0..len {
                    let orig = *param(m, li, which, k);
                    *param(m, li, which, k) = orig + eps;
                    let lp = loss(m, x, t);
                    *param(m, li, which, k) = orig - eps;
                    let lm = loss(m, x, t);
                    *param(m, li, which, k) = orig;
                    let num = (lp - lm) / (2.0 * eps);
                    let ana = if which == 0 { g[li].weights[k] } else { g[li].biases[k] };
                    let tol = 1e-4 * ana.abs().max(num.abs()) + 1e-9;
                    assert!(
                        (ana - num).abs() <= tol,
                        "layer {li} {} {k}: analytic {ana} numeric {num}",
                        ["w", "b"][which]
                    );
                    checked += 1;
                }
            }
        }
        checked
    }

    fn sample(len: usize, seed: u64) -> Vec<f64> {
        let mut r = SeededRng::new(seed);
        (0..len).map(|_| r.gaussian()).collect()
    }

    #[test]
    fn gradient_check_small_network() {
        let s = Shape3::new(2, 8, 8);
        // seed picked so that no ±eps step crosses a ReLU or pooling kink
        let mut m = net("c-4 p-2x2 fc-3", s, (3, 3), 5);
        let x = sample(s.len(), 4);
        let n = finite_difference_check(&mut m, &x, &[0.5, -1.0, 2.0]);
        assert_eq!(n, m.param_count());
    }

    #[test]
    fn gradient_check_two_conv_blocks() {
        let s = Shape3::new(2, 8, 8);
        let mut m = net("c-4 p-2x2 c-8 p-2x2 fc-16 fc-3", s, (2, 2), 7);
        let x = sample(s.len(), 8);
        finite_difference_check(&mut m, &x, &[0.3, 0.0, -0.7]);
    }

    #[test]
    fn floor_pooling_discards_remainder() {
        let s = Shape3::new(1, 5, 5);
        let x: Vec<f64> = (0..25).map(|v| v as f64).collect();
        let (o, a) = pool_forward(&x, s, 2, 2);
        assert_eq!(o, vec![6.0, 8.0, 16.0, 18.0]);
        assert_eq!(a, vec![6, 8, 16, 18]);
    }

    #[test]
    fn dropout_masks_scale_and_zero_gradients() {
        let s = Shape3::new(1, 1, 50);
        let m = net("fc-40 fc-3", s, (3, 3), 1);
        let d = Dropout { rate: 0.5, depth: 1 };
        assert_eq!(d.masked_layers(&m), vec![1]);
        let x = sample(50, 2);
        let mut r = SeededRng::new(9);
        let cache = forward(&m, &x, Some((d, &mut r)));
        let mask = cache.masks[1].as_ref().unwrap();
        assert!(mask.iter().all(|&k| k == 0.0 || k == 2.0));
        let (_, dout) = mse_and_grad(cache.output(), &[1.0, 1.0, 1.0]);
        let (g, _) = backward_from(&m, &cache, 1, &dout);
        for (j, &k) in mask.iter().enumerate() {
            if k == 0.0 {
                for u in 0..3 {
                    assert_eq!(g[1].weights[u * 40 + j], 0.0);
                }
            }
        }
    }

    #[test]
    fn dropout_expectation_matches_inference() {
        let s = Shape3::new(1, 1, 30);
        let m = net("fc-20 fc-3", s, (3, 3), 4);
        let d = Dropout { rate: 0.5, depth: 1 };
        let x = sample(30, 5);
        let infer = forward(&m, &x, None).output()[0];
        let mut r = SeededRng::new(11);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| forward(&m, &x, Some((d, &mut r))).output()[0]).collect();
        let mean = crate::numerics::mean(&draws);
        let se = crate::numerics::sample_std(&draws) / (n as f64).sqrt();
        assert!(
            (mean - infer).abs() < 3.0 * se,
            "train mean {mean} vs infer {infer} (se {se})"
        );
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = net("c-4 p-2x2 fc-3", Shape3::new(2, 8, 8), (3, 3), 1);
        for p in &mut m.params {
            p.weights.iter_mut().for_each(|w| *w = 0.0);
            p.biases.iter_mut().for_each(|w| *w = 0.0);
        }
        assert_eq!(forward(&m, &[0.0; 128], None).output(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn perfect_prediction_has_zero_output_gradient() {
        let m = net("c-4 p-2x2 fc-3", Shape3::new(2, 8, 8), (3, 3), 1);
        let x = sample(128, 3);
        let out = forward(&m, &x, None).output().to_vec();
        let (loss, g) = loss_and_gradients(&m, &x, &out, None);
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|p| p.weights.iter().chain(&p.biases).all(|&v| v == 0.0)));
    }

    #[test]
    fn pool_takes_maximum() {
        let (o, _) = pool_forward(&[1.0, 2.0, 3.0, 4.0], Shape3::new(1, 2, 2), 2, 2);
        assert_eq!(o, vec![4.0]);
    }

    #[test]
    fn dropout_never_touches_raw_input() {
        let m = net("fc-3", Shape3::new(1, 1, 4), (3, 3), 1);
        let d = Dropout { rate: 0.5, depth: 3 };
        assert!(d.masked_layers(&m).is_empty());
    }
}
