//! End-to-end runs of the experiment harness on a tiny synthetic corpus.

use std::path::Path;
use std::sync::OnceLock;

use muscle_state::nn::SampleSource;
use muscle_state::pipeline::{
    emit_report, load_corpus, load_run, report_from_run, run_experiment_on, save_run, synth_corpus, trace_file_name,
    trace_from_csv, CorpusConfig, ExperimentConfig, FrontEnd, Method, MetricsReport, PairSamples, Recording,
    METRICS_FILE,
};
use muscle_state::signal::Condition;

struct Corpus {
    _dir: tempfile::TempDir,
    recs: Vec<Recording>,
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = CorpusConfig {
            participants: 4,
            seconds: 3.0,
            region_height: 24,
            region_width: 48,
            ..CorpusConfig::default()
        };
        synth_corpus(dir.path(), &cfg).unwrap();
        let recs = load_corpus(dir.path()).unwrap();
        Corpus { _dir: dir, recs }
    })
}

fn quick(method: Method) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(method);
    c.train.max_updates = 300;
    c.train.eval_interval = 100;
    c.train.patience = 2;
    c.kmeans_images = 20;
    c.kmeans_iters = 20;
    c.clusters = 4;
    c.val_stride = 4;
    c
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn both_methods_share_split_rows_and_truth() {
    let recs = &corpus().recs;
    let cnn = run_experiment_on(&quick(Method::Cnn), recs).unwrap();
    let klt = run_experiment_on(&quick(Method::KltAnn), recs).unwrap();

    assert_eq!(cnn.split, klt.split);
    assert!(matches!(cnn.front_end, FrontEnd::Frames(_)));
    assert!(matches!(klt.front_end, FrontEnd::ClusterMotion { .. }));

    let keys = |r: &MetricsReport| {
        r.rows
            .iter()
            .map(|m| (m.target.clone(), m.condition))
            .collect::<Vec<_>>()
    };
    assert_eq!(keys(&cnn.report), keys(&klt.report));
    assert_eq!(cnn.report.rows.len(), 9);

    assert_eq!(cnn.traces.len(), klt.traces.len());
    for (a, b) in cnn.traces.iter().zip(&klt.traces) {
        assert_eq!((a.participant, a.condition), (b.participant, b.condition));
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.truth, b.truth);
    }
}

#[test]
fn normalization_comes_from_training_participants_only() {
    let recs = &corpus().recs;
    for method in [Method::Cnn, Method::KltAnn] {
        let out = run_experiment_on(&quick(method), recs).unwrap();
        let train: Vec<&Recording> = recs
            .iter()
            .filter(|r| out.split.train.contains(&r.participant))
            .collect();
        let samples = PairSamples::new(&train, &out.front_end, 1).unwrap();

        let channels = out.model.input_norm.mean.len();
        let n_in = out.model.input_shape().len();
        let block = n_in / channels;
        let (mut sum, mut sq) = (vec![0.0; channels], vec![0.0; channels]);
        let mut targets = vec![Vec::new(); 3];
        let (mut x, mut t) = (Vec::new(), Vec::new());
        for i in 0..samples.len() {
            samples.fill(i, &mut x, &mut t);
            for (j, v) in x.iter().enumerate() {
                sum[j / block] += v;
                sq[j / block] += v * v;
            }
            for (col, v) in targets.iter_mut().zip(&t) {
                col.push(*v);
            }
        }
        let n = (samples.len() * block) as f64;
        for j in 0..channels {
            let mean = sum[j] / n;
            let std = ((sq[j] - n * mean * mean) / (n - 1.0)).sqrt();
            let m = &out.model.input_norm;
            assert!(
                (m.mean[j] - mean).abs() <= 1e-9 * (1.0 + mean.abs()),
                "{method:?} channel {j} mean"
            );
            assert!((m.std[j] - std).abs() <= 1e-9 * std, "{method:?} channel {j} std");
        }
        for (k, col) in targets.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
            let tn = out.model.target_norm[k];
            assert!(
                (tn.mean - mean).abs() <= 1e-12 + 1e-9 * mean.abs(),
                "{method:?} target {k} mean"
            );
            assert!(
                (tn.std - var.sqrt()).abs() <= 1e-9 * var.sqrt(),
                "{method:?} target {k} std"
            );
        }

        // Including the held-out participants would have moved the target constants.
        let all: Vec<&Recording> = recs.iter().collect();
        let everyone = PairSamples::new(&all, &out.front_end, 1).unwrap();
        let mut col = Vec::new();
        for i in 0..everyone.len() {
            everyone.fill(i, &mut x, &mut t);
            col.push(t[0]);
        }
        let mean_all = col.iter().sum::<f64>() / col.len() as f64;
        assert_ne!(mean_all, out.model.target_norm[0].mean);
    }
}

#[test]
fn identical_configs_give_identical_runs() {
    let recs = &corpus().recs;
    let cfg = quick(Method::KltAnn);
    let a = run_experiment_on(&cfg, recs).unwrap();
    let b = run_experiment_on(&cfg, recs).unwrap();
    assert_eq!(a.report.to_csv(), b.report.to_csv());

    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_run(&a, da.path()).unwrap();
    save_run(&b, db.path()).unwrap();
    assert_eq!(read_tree(da.path()), read_tree(db.path()));
}

#[test]
fn oversized_architecture_fails_before_training() {
    let recs = &corpus().recs;
    let mut cfg = quick(Method::Cnn);
    cfg.arch = "c-8 p-2x2 c-8 p-2x2 c-8 p-2x2 c-8 p-2x2 fc-3".into();
    cfg.train.max_updates = 1_000_000_000;
    let err = run_experiment_on(&cfg, recs).unwrap_err();
    assert_eq!(err.kind(), "shape-error");

    let mut cfg = quick(Method::KltAnn);
    cfg.arch = "fc-8 fc-2".into();
    assert_eq!(run_experiment_on(&cfg, recs).unwrap_err().kind(), "shape-error");
}

#[test]
fn validation_participant_must_differ_from_test() {
    let mut cfg = quick(Method::Cnn);
    cfg.val_participant = Some(2);
    cfg.test_participant = Some(2);
    assert_eq!(
        run_experiment_on(&cfg, &corpus().recs).unwrap_err().kind(),
        "invalid-config"
    );
}

#[test]
fn report_files_cover_every_row_and_frame() {
    let recs = &corpus().recs;
    let mut cfg = quick(Method::Cnn);
    cfg.test_participant = Some(3);
    let out = run_experiment_on(&cfg, recs).unwrap();
    assert_eq!(out.split.test, 3);

    let dir = tempfile::tempdir().unwrap();
    emit_report(&out.report, &out.traces, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let rows = MetricsReport::from_csv(&csv).unwrap();
    assert_eq!(rows.len(), 9);
    for c in Condition::ALL {
        assert_eq!(rows.iter().filter(|r| r.condition == c).count(), 3);
    }
    for t in &out.traces {
        let rec = recs
            .iter()
            .find(|r| r.participant == 3 && r.condition == t.condition)
            .unwrap();
        let text = std::fs::read_to_string(dir.path().join(trace_file_name(t))).unwrap();
        let cols = trace_from_csv(&text).unwrap();
        assert!(cols
            .iter()
            .all(|[a, b]| a.len() == rec.len() - 1 && b.len() == rec.len() - 1));
    }

    // A saved run re-emits the same metrics without retraining.
    let run = tempfile::tempdir().unwrap();
    save_run(&out, run.path()).unwrap();
    let saved = load_run(run.path()).unwrap();
    assert_eq!(saved.config.test_participant, Some(3));
    let again = tempfile::tempdir().unwrap();
    report_from_run(run.path(), again.path()).unwrap();
    assert_eq!(std::fs::read_to_string(again.path().join(METRICS_FILE)).unwrap(), csv);
}
