use super::layers::{forward, loss_and_gradients, mse_and_grad, Dropout};
use super::model::{InputNorm, LayerParams, NetworkModel};
use crate::numerics::{Normalization, SeededRng};
use crate::{Error, Result};

/// Online SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub dropout_rate: f64,
    /// Number of weighted layers, counted from the output, whose inputs are
    /// masked.
    pub dropout_depth: usize,
    /// Updates between validation evaluations.
    pub eval_interval: usize,
    pub patience: usize,
    pub max_updates: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            momentum: 0.95,
            dropout_rate: 0.5,
            dropout_depth: 1,
            eval_interval: 10_000,
            patience: 5,
            max_updates: 2_500_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if self.eval_interval == 0 || self.patience == 0 || self.max_updates == 0 {
            return bad("eval interval, patience and max updates must be positive");
        }
        Ok(())
    }

    fn dropout(&self) -> Option<Dropout> {
        (self.dropout_rate > 0.0 && self.dropout_depth > 0).then_some(Dropout {
            rate: self.dropout_rate,
            depth: self.dropout_depth,
        })
    }
}

/// Random-access source of raw (unnormalized) samples.
pub trait SampleSource {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes sample `i` into `input` and `target`, replacing their contents.
    fn fill(&self, i: usize, input: &mut Vec<f64>, target: &mut Vec<f64>);
}

/// In-memory samples.
#[derive(Debug, Clone, Default)]
pub struct VecSamples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl SampleSource for VecSamples {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn fill(&self, i: usize, input: &mut Vec<f64>, target: &mut Vec<f64>) {
        input.clear();
        input.extend_from_slice(&self.inputs[i]);
        target.clear();
        target.extend_from_slice(&self.targets[i]);
    }
}

/// How input statistics are pooled when fitting normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputNormMode {
    /// One mean and std shared by every input element.
    Shared,
    /// Separate statistics per channel (images with unlike channels).
    PerChannel,
    /// Separate statistics per element (feature vectors).
    PerElement,
}

/// Fits input and target z-score constants on the training samples and
/// stores them in the model.
pub fn fit_normalization(model: &mut NetworkModel, train: &dyn SampleSource, mode: InputNormMode) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyData("no training samples".into()));
    }
    let (mut x, mut t) = (Vec::new(), Vec::new());
    let n_in = model.input_shape().len();
    let n_out = model.outputs();
    let blocks = match mode {
        InputNormMode::Shared => 1,
        InputNormMode::PerChannel => model.input_shape().c,
        InputNormMode::PerElement => n_in,
    };
    let block = n_in / blocks;
    let mut sum = vec![0.0; blocks];
    let mut sq = vec![0.0; blocks];
    let mut targets: Vec<Vec<f64>> = vec![Vec::with_capacity(train.len()); n_out];
    for i in 0..train.len() {
        train.fill(i, &mut x, &mut t);
        if x.len() != n_in || t.len() != n_out {
            return Err(Error::Shape(format!(
                "sample {i} has {} inputs and {} targets, model expects {n_in} and {n_out}",
                x.len(),
                t.len()
            )));
        }
        for (j, chunk) in x.chunks(block).enumerate() {
            for v in chunk {
                sum[j] += v;
                sq[j] += v * v;
            }
        }
        for (col, v) in targets.iter_mut().zip(&t) {
            col.push(*v);
        }
    }
    let count = (train.len() * block) as f64;
    let mut mean = Vec::with_capacity(blocks);
    let mut std = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let m = sum[j] / count;
        let var = if count > 1.0 {
            (sq[j] - count * m * m) / (count - 1.0)
        } else {
            0.0
        };
        let s = var.max(0.0).sqrt();
        mean.push(m);
        std.push(if s > 1e-12 { s } else { 1.0 });
    }
    model.input_norm = InputNorm { mean, std };
    model.target_norm = targets.iter().map(|c| Normalization::fit_or_unit(c)).collect();
    Ok(())
}

/// Classical momentum: `v = momentum*v - lr*g`, `w += v`.
pub fn sgd_update(model: &mut NetworkModel, grads: &[LayerParams], lr: f64, momentum: f64) {
    for ((p, v), g) in model.params.iter_mut().zip(&mut model.velocity).zip(grads) {
        for ((w, vel), gv) in p.weights.iter_mut().zip(&mut v.weights).zip(&g.weights) {
            *vel = momentum * *vel - lr * gv;
            *w += *vel;
        }
        for ((w, vel), gv) in p.biases.iter_mut().zip(&mut v.biases).zip(&g.biases) {
            *vel = momentum * *vel - lr * gv;
            *w += *vel;
        }
    }
}

/// Outcome of feeding one validation loss to an [`EarlyStopper`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive evaluations without a new minimum.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_index: Option<usize>,
    seen: usize,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_index: None,
            seen: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        let idx = self.seen;
        self.seen += 1;
        if loss < self.best {
            self.best = loss;
            self.best_index = Some(idx);
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best_index.map(|i| (i, self.best))
    }
}

/// One validation evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub updates: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub evals: Vec<EvalPoint>,
    pub best_eval: usize,
    pub updates: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn best(&self) -> EvalPoint {
        self.evals[self.best_eval]
    }
}

/// Online training with a caller-supplied validator. The model ends up
/// holding the parameters from the best evaluation.
pub fn train_with_validator<F>(
    model: &mut NetworkModel,
    train: &dyn SampleSource,
    cfg: &TrainConfig,
    mut validate: F,
) -> Result<TrainHistory>
where
    F: FnMut(&NetworkModel) -> Result<f64>,
{
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyData("no training samples".into()));
    }
    let mut rng = SeededRng::new(cfg.seed).child_named("train-order");
    let mut drop_rng = SeededRng::new(cfg.seed).child_named("dropout");
    let dropout = cfg.dropout();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let (mut x, mut t) = (Vec::new(), Vec::new());
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut best_params = model.params.clone();
    let mut evals = Vec::new();
    let mut running = 0.0;
    let mut running_n = 0usize;
    let mut stopped_early = false;
    let mut updates = 0;
    while updates < cfg.max_updates {
        if cursor == order.len() {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        train.fill(order[cursor], &mut x, &mut t);
        cursor += 1;
        model.input_norm.apply_in_place(&mut x);
        let t = model.normalize_targets(&t);
        let (loss, grads) = loss_and_gradients(model, &x, &t, dropout.map(|d| (d, &mut drop_rng)));
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became {loss} at update {updates}"
            )));
        }
        sgd_update(model, &grads, cfg.learning_rate, cfg.momentum);
        running += loss;
        running_n += 1;
        updates += 1;
        if updates % cfg.eval_interval == 0 || updates == cfg.max_updates {
            let val = validate(model)?;
            if !val.is_finite() {
                return Err(Error::Numeric(format!(
                    "validation loss became {val} at update {updates}"
                )));
            }
            evals.push(EvalPoint {
                updates,
                train_mse: running / running_n as f64,
                val_mse: val,
            });
            running = 0.0;
            running_n = 0;
            match stopper.observe(val) {
                StopDecision::Improved => best_params.clone_from(&model.params),
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    let (best_eval, _) = stopper.best().expect("at least one evaluation ran");
    model.params = best_params;
    model.zero_velocity();
    Ok(TrainHistory {
        evals,
        best_eval,
        updates,
        stopped_early,
    })
}

/// Mean squared error over a sample set, in normalized target units.
pub fn evaluate_mse(model: &NetworkModel, samples: &dyn SampleSource) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyData("no validation samples".into()));
    }
    let (mut x, mut t) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for i in 0..samples.len() {
        samples.fill(i, &mut x, &mut t);
        model.input_norm.apply_in_place(&mut x);
        let t = model.normalize_targets(&t);
        total += mse_and_grad(forward(model, &x, None).output(), &t).0;
    }
    Ok(total / samples.len() as f64)
}

/// Online training with validation MSE on `val` and early stopping.
pub fn train_early_stopping(
    model: &mut NetworkModel,
    train: &dyn SampleSource,
    val: &dyn SampleSource,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if val.is_empty() {
        return Err(Error::EmptyData("no validation samples".into()));
    }
    train_with_validator(model, train, cfg, |m| evaluate_mse(m, val))
}

/// Prediction in physical target units for a raw input.
pub fn predict(model: &NetworkModel, raw_input: &[f64]) -> Result<Vec<f64>> {
    if raw_input.len() != model.input_shape().len() {
        return Err(Error::Shape(format!(
            "input has {} values, model expects {}",
            raw_input.len(),
            model.input_shape().len()
        )));
    }
    let mut x = raw_input.to_vec();
    model.input_norm.apply_in_place(&mut x);
    Ok(model.denormalize_targets(forward(model, &x, None).output()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::{ArchOptions, ArchitectureSpec, Shape3};
    use crate::nn::model::initialize_network;

    fn fc_model(text: &str, inputs: usize, seed: u64) -> NetworkModel {
        let spec =
            ArchitectureSpec::from_layer_string(text, Shape3::new(1, 1, inputs), &ArchOptions::default()).unwrap();
        initialize_network(&spec, &mut SeededRng::new(seed))
    }

    #[test]
    fn momentum_recursion() {
        let mut m = fc_model("fc-3", 2, 1);
        let w0 = m.params[0].weights.clone();
        let mut g = m.params.clone();
        g[0].weights
            .iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = i as f64 + 1.0);
        g[0].biases.iter_mut().for_each(|b| *b = -2.0);
        sgd_update(&mut m, &g, 1.0, 0.9);
        sgd_update(&mut m, &g, 1.0, 0.9);
        for (i, (w, w0)) in m.params[0].weights.iter().zip(&w0).enumerate() {
            let gi = i as f64 + 1.0;
            assert!((m.velocity[0].weights[i] + 1.9 * gi).abs() < 1e-12);
            assert!((w - (w0 - 2.9 * gi)).abs() < 1e-12);
        }
        assert!(m.params[0].biases.iter().all(|b| (b - 5.8).abs() < 1e-12));
    }

    #[test]
    fn plain_sgd_and_zero_gradient() {
        let mut m = fc_model("fc-3", 2, 1);
        let before = m.clone();
        let mut g = m.params.clone();
        for p in &mut g {
            p.weights.iter_mut().for_each(|w| *w = 0.0);
            p.biases.iter_mut().for_each(|w| *w = 0.0);
        }
        sgd_update(&mut m, &g, 0.1, 0.95);
        assert_eq!(m, before);
        g[0].weights[0] = 2.0;
        sgd_update(&mut m, &g, 0.1, 0.0);
        assert!((m.params[0].weights[0] - (before.params[0].weights[0] - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn scripted_early_stopping() {
        let script = [5.0, 4.0, 4.1, 4.2, 4.3, 4.4, 4.5, 3.0, 2.0];
        let mut m = fc_model("fc-3", 2, 1);
        let train = VecSamples {
            inputs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            targets: vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]],
        };
        let cfg = TrainConfig {
            learning_rate: 0.01,
            eval_interval: 1,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut calls = 0;
        let mut snapshots = Vec::new();
        let h = train_with_validator(&mut m, &train, &cfg, |m| {
            snapshots.push(m.params.clone());
            calls += 1;
            Ok(script[calls - 1])
        })
        .unwrap();
        assert_eq!(calls, 7);
        assert_eq!(h.evals.len(), 7);
        assert!(h.stopped_early);
        assert_eq!(h.best_eval, 1);
        assert_eq!(h.best().val_mse, 4.0);
        assert_eq!(m.params, snapshots[1]);
    }

    #[test]
    fn stops_at_update_cap_when_improving() {
        let mut m = fc_model("fc-3", 2, 1);
        let train = VecSamples {
            inputs: vec![vec![1.0, 0.0]],
            targets: vec![vec![0.0, 0.0, 0.0]],
        };
        let cfg = TrainConfig {
            eval_interval: 10,
            max_updates: 95,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut loss = 100.0;
        let h = train_with_validator(&mut m, &train, &cfg, |_| {
            loss -= 1.0;
            Ok(loss)
        })
        .unwrap();
        assert_eq!(h.updates, 95);
        assert!(!h.stopped_early);
        assert_eq!(h.evals.len(), 10);
    }

    #[test]
    fn empty_sets_rejected() {
        let mut m = fc_model("fc-3", 2, 1);
        let empty = VecSamples::default();
        let err = train_early_stopping(&mut m, &empty, &empty, &TrainConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "empty-data");
    }

    #[test]
    fn toy_linear_regression_converges() {
        let mut rng = SeededRng::new(3);
        let map = [[0.5, -1.0, 2.0, 0.0], [1.0, 1.0, 0.0, -0.5], [0.0, 0.3, -0.7, 1.2]];
        let mut train = VecSamples::default();
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
            let y = map.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
            train.inputs.push(x);
            train.targets.push(y);
        }
        let mut m = fc_model("fc-16 fc-3", 4, 2);
        fit_normalization(&mut m, &train, InputNormMode::PerElement).unwrap();
        let cfg = TrainConfig {
            learning_rate: 2e-3,
            momentum: 0.9,
            dropout_rate: 0.0,
            eval_interval: 5_000,
            max_updates: 100_000,
            ..TrainConfig::default()
        };
        let h = train_early_stopping(&mut m, &train, &train, &cfg).unwrap();
        let mse = evaluate_mse(&m, &train).unwrap();
        assert!(mse < 1e-3, "train mse {mse}");
        let min = h.evals.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(mse, min);
    }

    #[test]
    fn per_channel_statistics() {
        let spec = ArchitectureSpec::from_layer_string("fc-3", Shape3::new(2, 1, 2), &ArchOptions::default()).unwrap();
        let mut m = initialize_network(&spec, &mut SeededRng::new(1));
        let train = VecSamples {
            inputs: vec![vec![1.0, 3.0, 10.0, 10.0], vec![1.0, 3.0, 20.0, 20.0]],
            targets: vec![vec![0.0; 3], vec![1.0; 3]],
        };
        fit_normalization(&mut m, &train, InputNormMode::PerChannel).unwrap();
        assert_eq!(m.input_norm.mean, vec![2.0, 15.0]);
        let mut x = vec![2.0, 2.0, 15.0, 15.0];
        m.input_norm.apply_in_place(&mut x);
        assert_eq!(x, vec![0.0; 4]);
        let mut z = vec![1.0, -1.0, 0.0, 1.0];
        let orig = z.clone();
        m.input_norm.apply_in_place(&mut z);
        m.input_norm.invert_in_place(&mut z);
        assert!(z.iter().zip(&orig).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn identical_seeds_train_identically() {
        let train = VecSamples {
            inputs: (0..20).map(|i| vec![i as f64, 1.0]).collect(),
            targets: (0..20).map(|i| vec![i as f64, 0.0, -(i as f64)]).collect(),
        };
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            eval_interval: 50,
            max_updates: 300,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = fc_model("fc-8 fc-3", 2, 9);
            fit_normalization(&mut m, &train, InputNormMode::PerElement).unwrap();
            train_early_stopping(&mut m, &train, &train, &cfg).unwrap();
            m
        };
        assert_eq!(run(), run());
    }
}
