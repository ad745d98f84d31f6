use super::config::{ExperimentConfig, Method};
use super::corpus::{load_corpus, Recording};
use super::frontend::{fit_clusters, FrontEnd, PairSamples};
use super::metrics::{regression_metrics, MetricsReport, TARGETS};
use super::split::{loso_split, Split};
use crate::nn::{
    fit_normalization, initialize_network, predict, train_early_stopping, ArchitectureSpec, NetworkModel, SampleSource,
    TrainHistory,
};
use crate::numerics::SeededRng;
use crate::signal::Condition;
use crate::{Error, Result};

/// Per-frame truth and prediction of one test recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub participant: u32,
    pub condition: Condition,
    pub fps: f64,
    /// Frame index of each row (the later frame of the pair).
    pub frames: Vec<usize>,
    pub truth: Vec<[f64; 3]>,
    pub pred: Vec<[f64; 3]>,
}

impl Trace {
    pub fn column(&self, target: usize, predicted: bool) -> Vec<f64> {
        let src = if predicted { &self.pred } else { &self.truth };
        src.iter().map(|r| r[target]).collect()
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub split: Split,
    pub front_end: FrontEnd,
    pub model: NetworkModel,
    pub history: TrainHistory,
    pub report: MetricsReport,
    pub traces: Vec<Trace>,
}

/// Loads the corpus named in the config and runs it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let recs = load_corpus(&cfg.data)?;
    run_experiment_on(cfg, &recs)
}

/// Splits, fits the front end and the network on training participants,
/// selects the model on the validation participant and scores the test
/// participant once.
pub fn run_experiment_on(cfg: &ExperimentConfig, recs: &[Recording]) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let recs: Vec<&Recording> = recs
        .iter()
        .filter(|r| cfg.conditions.contains(&r.condition))
        .filter(|r| cfg.participants.as_ref().is_none_or(|p| p.contains(&r.participant)))
        .collect();
    if recs.is_empty() {
        return Err(Error::EmptyData(
            "no recordings match the configured participants and conditions".into(),
        ));
    }
    let mut roster: Vec<u32> = recs.iter().map(|r| r.participant).collect();
    roster.dedup();
    let split = loso_split(&roster, cfg.split_seed, cfg.val_participant, cfg.test_participant)?;
    let pick =
        |ids: &[u32]| -> Vec<&Recording> { recs.iter().copied().filter(|r| ids.contains(&r.participant)).collect() };
    let train_recs = pick(&split.train);
    let val_recs = pick(&[split.val]);
    let test_recs = pick(&[split.test]);

    let (h, w) = (recs[0].height, recs[0].width);
    // Shape problems surface before any fitting.
    if cfg.method == Method::Cnn {
        ArchitectureSpec::from_layer_string(
            &cfg.arch,
            FrontEnd::Frames(cfg.pair_encoding).input_shape(h, w),
            &cfg.arch_options,
        )?;
    }
    let front_end = match cfg.method {
        Method::Cnn => FrontEnd::Frames(cfg.pair_encoding),
        Method::KltAnn => FrontEnd::ClusterMotion {
            clusters: fit_clusters(&train_recs, cfg)?,
            params: cfg.front_end.clone(),
        },
    };
    let spec = ArchitectureSpec::from_layer_string(&cfg.arch, front_end.input_shape(h, w), &cfg.arch_options)?;

    let train = PairSamples::new(&train_recs, &front_end, 1)?;
    let val = PairSamples::new(&val_recs, &front_end, cfg.val_stride)?;
    let mut model = initialize_network(&spec, &mut SeededRng::new(cfg.train.seed).child_named("init"));
    fit_normalization(&mut model, &train, front_end.norm_mode())?;
    let history = train_early_stopping(&mut model, &train, &val, &cfg.train)?;

    let traces = predict_recordings(&model, &front_end, &test_recs)?;
    let report = build_report(cfg, &split, &model, &history, &traces)?;
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        split,
        front_end,
        model,
        history,
        report,
        traces,
    })
}

/// Runs the trained model over every consecutive pair of each recording.
pub fn predict_recordings(model: &NetworkModel, front_end: &FrontEnd, recs: &[&Recording]) -> Result<Vec<Trace>> {
    let mut traces = Vec::with_capacity(recs.len());
    let (mut x, mut t) = (Vec::new(), Vec::new());
    for r in recs {
        let samples = PairSamples::new(&[*r], front_end, 1)?;
        let mut trace = Trace {
            participant: r.participant,
            condition: r.condition,
            fps: r.labels.fps,
            frames: Vec::with_capacity(samples.len()),
            truth: Vec::with_capacity(samples.len()),
            pred: Vec::with_capacity(samples.len()),
        };
        for i in 0..samples.len() {
            samples.fill(i, &mut x, &mut t);
            let p = predict(model, &x)?;
            trace.frames.push(samples.locate(i).1);
            trace.truth.push([t[0], t[1], t[2]]);
            trace.pred.push([p[0], p[1], p[2]]);
        }
        traces.push(trace);
    }
    Ok(traces)
}

/// One row per target and condition present in `traces`.
pub fn score_traces(model: &NetworkModel, traces: &[Trace]) -> Result<Vec<super::metrics::MetricsRow>> {
    let mut rows = Vec::new();
    for (ti, target) in TARGETS.iter().enumerate() {
        for c in Condition::ALL {
            let sel: Vec<&Trace> = traces.iter().filter(|t| t.condition == c).collect();
            if sel.is_empty() {
                continue;
            }
            let pred: Vec<f64> = sel.iter().flat_map(|t| t.column(ti, true)).collect();
            let truth: Vec<f64> = sel.iter().flat_map(|t| t.column(ti, false)).collect();
            rows.push(regression_metrics(target, c, &pred, &truth, model.target_norm[ti])?);
        }
    }
    Ok(rows)
}

fn build_report(
    cfg: &ExperimentConfig,
    split: &Split,
    model: &NetworkModel,
    history: &TrainHistory,
    traces: &[Trace],
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        method: cfg.method.as_str().to_string(),
        arch: cfg.arch.clone(),
        seed: cfg.train.seed,
        config_digest: cfg.digest(),
        train_participants: split.train.clone(),
        val_participant: split.val,
        test_participant: split.test,
        updates: history.updates,
        best_val_mse: history.best().val_mse,
        rows: score_traces(model, traces)?,
    })
}
