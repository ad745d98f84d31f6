//! Run directories: metrics table, traces, training history, plots and the
//! artifacts needed to evaluate the model again.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, KvConfig};
use super::experiment::{ExperimentOutcome, Trace};
use super::frontend::{clusters_from_text, clusters_to_text, FrontEnd};
use super::metrics::{MetricsReport, TARGETS};
use super::plot::{line_plot_png, Series};
use crate::nn::{load_checkpoint, save_checkpoint, NetworkModel, TrainHistory};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const MODEL_FILE: &str = "model.musn";
pub const CONFIG_FILE: &str = "config.txt";
pub const CLUSTERS_FILE: &str = "clusters.txt";
pub const HISTORY_FILE: &str = "history.csv";

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn trace_file_name(t: &Trace) -> String {
    format!("trace_p{:02}_{}.csv", t.participant, t.condition)
}

/// Raw per-frame deltas plus their running sums.
pub fn trace_to_csv(t: &Trace) -> String {
    let mut s = String::from("frame,time_s");
    for target in TARGETS {
        let _ = write!(s, ",{target}_true,{target}_pred");
    }
    for target in TARGETS {
        let name = target.trim_start_matches("d_");
        let _ = write!(s, ",{name}_cum_true,{name}_cum_pred");
    }
    s.push('\n');
    let mut cum = [0.0f64; 6];
    for (i, &k) in t.frames.iter().enumerate() {
        let _ = write!(s, "{k},{:.4}", k as f64 / t.fps);
        for j in 0..3 {
            let _ = write!(s, ",{:.6e},{:.6e}", t.truth[i][j], t.pred[i][j]);
            cum[2 * j] += t.truth[i][j];
            cum[2 * j + 1] += t.pred[i][j];
        }
        for v in cum {
            let _ = write!(s, ",{v:.6e}");
        }
        s.push('\n');
    }
    s
}

/// Reads a trace file written by [`trace_to_csv`] back into columns
/// `[truth, pred]` per target.
pub fn trace_from_csv(text: &str) -> Result<Vec<[Vec<f64>; 2]>> {
    let mut cols: Vec<[Vec<f64>; 2]> = vec![
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
        [Vec::new(), Vec::new()],
    ];
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::CorruptDataset(format!("trace line {line:?}")))?;
        if f.len() < 8 {
            return Err(Error::CorruptDataset(format!("trace line {line:?} is short")));
        }
        for j in 0..3 {
            cols[j][0].push(f[2 + 2 * j]);
            cols[j][1].push(f[3 + 2 * j]);
        }
    }
    Ok(cols)
}

pub fn history_to_csv(h: &TrainHistory) -> String {
    let mut s = String::from("updates,train_mse,val_mse,best\n");
    for (i, e) in h.evals.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{:.6e},{:.6e},{}",
            e.updates,
            e.train_mse,
            e.val_mse,
            u8::from(i == h.best_eval)
        );
    }
    s
}

const TRUTH: [u8; 3] = [40, 40, 40];
const PRED: [u8; 3] = [210, 40, 40];

/// Prediction-vs-truth plots for one trace: deltas and running sums.
fn plot_trace(dir: &Path, stem: &str, cols: &[[Vec<f64>; 2]]) -> Result<()> {
    for (j, target) in TARGETS.iter().enumerate() {
        let [truth, pred] = &cols[j];
        line_plot_png(
            &dir.join(format!("{stem}_{target}.png")),
            &[
                Series {
                    values: truth,
                    color: TRUTH,
                },
                Series {
                    values: pred,
                    color: PRED,
                },
            ],
            900,
            220,
        )?;
        let cum = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        };
        let name = target.trim_start_matches("d_");
        line_plot_png(
            &dir.join(format!("{stem}_{name}_cumulative.png")),
            &[
                Series {
                    values: &cum(truth),
                    color: TRUTH,
                },
                Series {
                    values: &cum(pred),
                    color: PRED,
                },
            ],
            900,
            220,
        )?;
    }
    Ok(())
}

/// Writes the metrics table, one trace file per test recording and the
/// plots into `out`.
pub fn emit_report(report: &MetricsReport, traces: &[Trace], out: &Path) -> Result<Vec<PathBuf>> {
    mkdir(out)?;
    let mut written = Vec::new();
    let p = out.join(METRICS_FILE);
    write(&p, &report.to_csv())?;
    written.push(p);
    let plots = out.join("plots");
    mkdir(&plots)?;
    for t in traces {
        let p = out.join(trace_file_name(t));
        write(&p, &trace_to_csv(t))?;
        written.push(p);
        let cols: Vec<[Vec<f64>; 2]> = (0..3).map(|j| [t.column(j, false), t.column(j, true)]).collect();
        plot_trace(&plots, &format!("p{:02}_{}", t.participant, t.condition), &cols)?;
    }
    Ok(written)
}

/// Re-plots the traces of a finished run directory into `out` and copies
/// its metrics table.
pub fn report_from_run(run: &Path, out: &Path) -> Result<usize> {
    let metrics = run.join(METRICS_FILE);
    let text = fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
    MetricsReport::from_csv(&text)?;
    mkdir(out)?;
    let plots = out.join("plots");
    mkdir(&plots)?;
    if run != out {
        write(&out.join(METRICS_FILE), &text)?;
    }
    let mut names: Vec<String> = fs::read_dir(run)
        .map_err(|e| Error::io(run, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("trace_") && n.ends_with(".csv"))
        .collect();
    names.sort();
    for n in &names {
        let p = run.join(n);
        let cols = trace_from_csv(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?;
        plot_trace(&plots, n.trim_start_matches("trace_").trim_end_matches(".csv"), &cols)?;
    }
    Ok(names.len())
}

/// Everything needed to reuse a trained model.
pub struct SavedRun {
    pub config: ExperimentConfig,
    pub model: NetworkModel,
    pub front_end: FrontEnd,
}

/// Report files plus checkpoint, config (with the split made explicit),
/// clusters and training history.
pub fn save_run(outcome: &ExperimentOutcome, out: &Path) -> Result<()> {
    emit_report(&outcome.report, &outcome.traces, out)?;
    save_checkpoint(&outcome.model, &out.join(MODEL_FILE))?;
    let mut config = outcome.config.clone();
    config.val_participant = Some(outcome.split.val);
    config.test_participant = Some(outcome.split.test);
    write(&out.join(CONFIG_FILE), &config.to_text())?;
    write(&out.join(HISTORY_FILE), &history_to_csv(&outcome.history))?;
    if let FrontEnd::ClusterMotion { clusters, .. } = &outcome.front_end {
        write(&out.join(CLUSTERS_FILE), &clusters_to_text(clusters))?;
    }
    Ok(())
}

/// Loads a run directory written by [`save_run`].
pub fn load_run(dir: &Path) -> Result<SavedRun> {
    let config = ExperimentConfig::from_kv(&KvConfig::load(&dir.join(CONFIG_FILE))?)?;
    let model = load_checkpoint(&dir.join(MODEL_FILE))?;
    let front_end = match config.method {
        super::Method::Cnn => FrontEnd::Frames(config.pair_encoding),
        super::Method::KltAnn => {
            let p = dir.join(CLUSTERS_FILE);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            FrontEnd::ClusterMotion {
                clusters: clusters_from_text(&text, &p)?,
                params: config.front_end.clone(),
            }
        }
    };
    Ok(SavedRun {
        config,
        model,
        front_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Condition;

    fn trace() -> Trace {
        Trace {
            participant: 3,
            condition: Condition::Passive,
            fps: 25.0,
            frames: vec![1, 2, 3],
            truth: vec![[0.0, 1.0, 2.0], [0.5, -1.0, 0.0], [0.25, 0.0, 1.0]],
            pred: vec![[0.1, 0.9, 2.1], [0.4, -1.1, 0.1], [0.2, 0.1, 0.8]],
        }
    }

    #[test]
    fn trace_rows_match_pairs_and_round_trip() {
        let t = trace();
        let csv = trace_to_csv(&t);
        assert_eq!(csv.lines().count(), 1 + t.frames.len());
        let cols = trace_from_csv(&csv).unwrap();
        assert_eq!(cols[1][0], vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn emit_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let report = MetricsReport {
            method: "cnn".into(),
            arch: "fc-3".into(),
            seed: 0,
            config_digest: "x".into(),
            train_participants: vec![1],
            val_participant: 2,
            test_participant: 3,
            updates: 1,
            best_val_mse: 1.0,
            rows: vec![],
        };
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        emit_report(&report, &[trace()], &a).unwrap();
        emit_report(&report, &[trace()], &b).unwrap();
        for name in ["metrics.csv", "trace_p03_passive.csv", "plots/p03_passive_d_angle.png"] {
            assert_eq!(
                fs::read(a.join(name)).unwrap(),
                fs::read(b.join(name)).unwrap(),
                "{name}"
            );
        }
        assert_eq!(report_from_run(&a, &dir.path().join("c")).unwrap(), 1);
    }

    #[test]
    fn unwritable_destination() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let report = MetricsReport {
            method: "cnn".into(),
            arch: "fc-3".into(),
            seed: 0,
            config_digest: "x".into(),
            train_participants: vec![],
            val_participant: 0,
            test_participant: 1,
            updates: 0,
            best_val_mse: 0.0,
            rows: vec![],
        };
        assert_eq!(
            emit_report(&report, &[], &blocker.join("sub")).unwrap_err().kind(),
            "io-error"
        );
    }
}
