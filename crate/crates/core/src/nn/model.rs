use super::arch::{ArchitectureSpec, LayerSpec, Shape3};
use crate::numerics::{Normalization, SeededRng, Tensor};
use crate::{Error, Result};

/// Weights and biases of one layer (both empty for pooling).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(weights: usize, biases: usize) -> Self {
        Self {
            weights: vec![0.0; weights],
            biases: vec![0.0; biases],
        }
    }
}

/// Input z-score constants. `mean` and `std` have one entry per block of
/// consecutive input elements: one block shares a constant over the whole
/// input, one block per channel or one per element.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputNorm {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0],
            std: vec![1.0],
        }
    }

    pub fn scalar(n: Normalization) -> Self {
        Self {
            mean: vec![n.mean],
            std: vec![n.std],
        }
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        let block = (x.len() / self.mean.len()).max(1);
        for ((chunk, m), s) in x.chunks_mut(block).zip(&self.mean).zip(&self.std) {
            chunk.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
    }

    pub fn invert_in_place(&self, z: &mut [f64]) {
        let block = (z.len() / self.mean.len()).max(1);
        for ((chunk, m), s) in z.chunks_mut(block).zip(&self.mean).zip(&self.std) {
            chunk.iter_mut().for_each(|v| *v = *v * s + m);
        }
    }
}

/// Architecture plus parameters, momentum buffers and normalization
/// constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub spec: ArchitectureSpec,
    pub params: Vec<LayerParams>,
    pub velocity: Vec<LayerParams>,
    pub input_norm: InputNorm,
    pub target_norm: Vec<Normalization>,
}

/// Gaussian weights with variance `1 / fan_in`, zero biases and zero
/// momentum.
pub fn initialize_network(spec: &ArchitectureSpec, rng: &mut SeededRng) -> NetworkModel {
    let mut params = Vec::with_capacity(spec.layers().len());
    for i in 0..spec.layers().len() {
        let (nw, nb) = spec.param_counts(i);
        let mut p = LayerParams::zeros(nw, nb);
        if nw > 0 {
            let sd = (1.0 / spec.fan_in(i) as f64).sqrt();
            p.weights.iter_mut().for_each(|w| *w = sd * rng.gaussian());
        }
        params.push(p);
    }
    let velocity = params
        .iter()
        .map(|p| LayerParams::zeros(p.weights.len(), p.biases.len()))
        .collect();
    NetworkModel {
        target_norm: vec![Normalization::IDENTITY; spec.outputs()],
        spec: spec.clone(),
        params,
        velocity,
        input_norm: InputNorm::identity(),
    }
}

impl NetworkModel {
    pub fn input_shape(&self) -> Shape3 {
        self.spec.input()
    }

    pub fn outputs(&self) -> usize {
        self.spec.outputs()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.weights.len() + p.biases.len()).sum()
    }

    pub fn check_input(&self, input: &Tensor) -> Result<()> {
        let s = self.spec.input();
        if input.len() != s.len() {
            return Err(Error::Shape(format!(
                "input of {} values (shape {:?}) does not match {}x{}x{}",
                input.len(),
                input.shape(),
                s.c,
                s.h,
                s.w
            )));
        }
        Ok(())
    }

    /// Normalized-target prediction back to physical units.
    pub fn denormalize_targets(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.target_norm).map(|(v, n)| n.invert(*v)).collect()
    }

    pub fn normalize_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.target_norm).map(|(v, n)| n.apply(*v)).collect()
    }

    pub fn zero_velocity(&mut self) {
        for v in &mut self.velocity {
            v.weights.iter_mut().for_each(|x| *x = 0.0);
            v.biases.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.weights.iter().chain(&p.biases).all(|v| v.is_finite()))
    }

    pub(crate) fn layer(&self, i: usize) -> LayerSpec {
        self.spec.layers()[i]
    }
}
