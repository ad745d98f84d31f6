//! Command-line front end: corpus generation, tracking, training,
//! evaluation, visualization and report rendering.
//!
//! Every flag has a config-file equivalent (`key=value`, `#` comments);
//! flags win over the file. Exit codes: 0 success, 1 usage, 2 data,
//! 3 numeric failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use muscle_state::nn::{maximize_activation, AscentParams, LayerSpec, UnitSelector};
use muscle_state::numerics::{GrayImage, SeededRng};
use muscle_state::pipeline::{
    emit_report, fit_clusters, gray_png, load_corpus, load_run, predict_recordings, report_from_run, run_experiment,
    save_run, score_traces, synth_corpus, visualize_pair_unit, CorpusConfig, ExperimentConfig, FrontEnd, KvConfig,
    MetricsReport, Recording, CONFIG_FILE, DEFAULT_RESTARTS,
};
use muscle_state::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(
    name = "muscle-state",
    version,
    about = "Muscle state changes from ultrasound-like frame pairs"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value setting, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a synthetic multi-participant corpus
    Synth {
        #[arg(long)]
        participants: Option<u32>,
        #[arg(long)]
        seconds: Option<f64>,
        #[arg(long)]
        fps: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write per-frame cluster motion vectors of one recording
    Track {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and test one method on a corpus
    Train {
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        arch: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a trained run on recordings
    Eval {
        /// Run directory written by `train`
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Participant to score; defaults to the run's test participant
        #[arg(long)]
        participant: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Activation maximization for one unit of a trained model
    Visualize {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Layer index; defaults to the output layer
        #[arg(long)]
        layer: Option<usize>,
        /// Unit (fully connected) or channel (conv/pool) index
        #[arg(long)]
        unit: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Re-render metrics and plots of a finished run
    Report {
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Config file, then `--set` pairs, then dedicated flags.
fn settings(common: &Common, flags: &[(&str, Option<String>)]) -> Result<KvConfig> {
    let mut kv = match &common.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects KEY=VALUE, got {s:?}")))?;
        kv.set(k.trim(), v.trim());
    }
    for (k, v) in flags {
        if let Some(v) = v {
            kv.set(k, v.clone());
        }
    }
    Ok(kv)
}

fn take_path(kv: &mut KvConfig, key: &str) -> Result<PathBuf> {
    kv.remove(key)
        .map(PathBuf::from)
        .ok_or_else(|| Error::InvalidConfig(format!("missing required setting {key:?} (flag --{key})")))
}

fn take_parsed<T: std::str::FromStr>(kv: &mut KvConfig, key: &str) -> Result<Option<T>> {
    let v = kv.parsed(key)?;
    kv.remove(key);
    Ok(v)
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn synth(mut kv: KvConfig) -> Result<()> {
    let out = take_path(&mut kv, "out")?;
    let cfg = CorpusConfig::from_kv(&kv)?;
    let dirs = synth_corpus(&out, &cfg)?;
    println!("wrote {} recordings to {}", dirs.len(), out.display());
    Ok(())
}

fn track(mut kv: KvConfig) -> Result<()> {
    let data = take_path(&mut kv, "data")?;
    let out = take_path(&mut kv, "out")?;
    kv.set("method", "klt-ann");
    let cfg = ExperimentConfig::from_kv(&kv)?;
    let recs = load_corpus(&data)?;
    let mut text = String::new();
    for rec in &recs {
        let clusters = fit_clusters(&[rec], &cfg)?;
        let k = clusters.k();
        let front = FrontEnd::ClusterMotion {
            clusters,
            params: cfg.front_end.clone(),
        };
        if text.is_empty() {
            text.push_str("participant,condition,frame");
            for i in 0..k {
                let _ = write!(text, ",dx{i},dy{i}");
            }
            text.push('\n');
        }
        let vectors = front.encode(rec)?.unwrap_or_default();
        for (i, v) in vectors.iter().enumerate() {
            let _ = write!(text, "{},{},{}", rec.participant, rec.condition, i + 1);
            for x in v {
                let _ = write!(text, ",{x:.6}");
            }
            text.push('\n');
        }
    }
    write_text(&out, &text)?;
    println!("tracked {} recordings into {}", recs.len(), out.display());
    Ok(())
}

fn train(mut kv: KvConfig) -> Result<()> {
    let out = take_path(&mut kv, "out")?;
    let cfg = ExperimentConfig::from_kv(&kv)?;
    let started = Instant::now();
    let outcome = run_experiment(&cfg)?;
    save_run(&outcome, &out)?;
    print_rows(&outcome.report);
    println!(
        "trained {} for {} updates in {:.1} s (best validation MSE {:.4}); run written to {}",
        cfg.method.as_str(),
        outcome.history.updates,
        started.elapsed().as_secs_f64(),
        outcome.report.best_val_mse,
        out.display()
    );
    Ok(())
}

fn print_rows(report: &MetricsReport) {
    for r in &report.rows {
        let r2 = r.r2.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{:9} {:10} rmse {:.4e}  r2 {r2}",
            r.target,
            r.condition.to_string(),
            r.rmse
        );
    }
}

fn eval(mut kv: KvConfig) -> Result<()> {
    let run = take_path(&mut kv, "model")?;
    let out = take_path(&mut kv, "out")?;
    let participant: Option<u32> = take_parsed(&mut kv, "participant")?;
    let saved = load_run(&run)?;
    let data = match kv.remove("data") {
        Some(d) => PathBuf::from(d),
        None => saved.config.data.clone(),
    };
    if let Some(k) = kv.keys().next() {
        return Err(Error::InvalidConfig(format!("unknown key {k:?} for eval")));
    }
    let recs = load_corpus(&data)?;
    let who = participant.or(saved.config.test_participant);
    let selected: Vec<&Recording> = recs
        .iter()
        .filter(|r| who.is_none_or(|p| r.participant == p))
        .filter(|r| saved.config.conditions.contains(&r.condition))
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyData(format!(
            "no matching recordings under {}",
            data.display()
        )));
    }
    let traces = predict_recordings(&saved.model, &saved.front_end, &selected)?;
    let report = MetricsReport {
        method: saved.config.method.as_str().to_string(),
        arch: saved.config.arch.clone(),
        seed: saved.config.train.seed,
        config_digest: saved.config.digest(),
        train_participants: Vec::new(),
        val_participant: saved.config.val_participant.unwrap_or(0),
        test_participant: who.unwrap_or(selected[0].participant),
        updates: 0,
        best_val_mse: f64::NAN,
        rows: score_traces(&saved.model, &traces)?,
    };
    emit_report(&report, &traces, &out)?;
    print_rows(&report);
    println!(
        "scored {} recordings; report written to {}",
        selected.len(),
        out.display()
    );
    Ok(())
}

fn visualize(mut kv: KvConfig) -> Result<()> {
    let run = take_path(&mut kv, "model")?;
    let out = take_path(&mut kv, "out")?;
    let saved = load_run(&run)?;
    let last = saved.model.spec.layers().len() - 1;
    let layer: usize = take_parsed(&mut kv, "layer")?.unwrap_or(last);
    let unit: usize = take_parsed(&mut kv, "unit")?.unwrap_or(0);
    let seed: u64 = take_parsed(&mut kv, "seed")?.unwrap_or(saved.config.train.seed);
    let ascent = AscentParams {
        iters: take_parsed(&mut kv, "iters")?.unwrap_or(AscentParams::default().iters),
        rate: take_parsed(&mut kv, "rate")?.unwrap_or(AscentParams::default().rate),
        l2: take_parsed(&mut kv, "l2")?.unwrap_or(AscentParams::default().l2),
    };
    let restarts: usize = take_parsed(&mut kv, "restarts")?.unwrap_or(DEFAULT_RESTARTS);
    if let Some(k) = kv.keys().next() {
        return Err(Error::InvalidConfig(format!("unknown key {k:?} for visualize")));
    }
    let selector = match saved.model.spec.layers().get(layer) {
        Some(LayerSpec::FullyConnected { .. }) => UnitSelector::Unit(unit),
        Some(_) => UnitSelector::AllSites { channel: unit },
        None => return Err(Error::BadUnit(format!("layer {layer} does not exist"))),
    };
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    match &saved.front_end {
        FrontEnd::Frames(encoding) => {
            let v = visualize_pair_unit(
                &saved.model,
                *encoding,
                layer,
                selector,
                ascent,
                &saved.config.front_end,
                seed,
                restarts,
            )?;
            gray_png(&out.join("frame_prev.png"), &v.prev)?;
            gray_png(&out.join("frame_next.png"), &v.next)?;
            let diff = GrayImage::from_fn(v.prev.height(), v.prev.width(), |x, y| {
                v.next.get(x, y) - v.prev.get(x, y)
            });
            gray_png(&out.join("frame_diff.png"), &diff)?;
            let summary = format!(
                "layer={layer}\nunit={unit}\nactivation_start={:.6}\nactivation_end={:.6}\ntracked={}\ntop_dx={:.6}\nbottom_dx={:.6}\nshear={}\n",
                v.activation[0],
                v.activation[v.activation.len() - 1],
                v.tracked,
                v.top_dx,
                v.bottom_dx,
                v.is_shear()
            );
            write_text(&out.join("summary.txt"), &summary)?;
            print!("{summary}");
        }
        FrontEnd::ClusterMotion { clusters, .. } => {
            let mut rng = SeededRng::new(seed).child_named("visualize");
            let r = maximize_activation(&saved.model, layer, selector, ascent, &mut rng)?;
            let mut raw = r.input.data().to_vec();
            saved.model.input_norm.invert_in_place(&mut raw);
            let mut text = String::from("cluster,center_x,center_y,dx,dy\n");
            for (i, m) in raw.chunks(2).enumerate() {
                let (cx, cy) = clusters.centroids[i];
                let _ = writeln!(text, "{i},{cx:.3},{cy:.3},{:.6},{:.6}", m[0], m[1]);
            }
            write_text(&out.join("cluster_motion.csv"), &text)?;
            println!(
                "optimized cluster motion written to {}",
                out.join("cluster_motion.csv").display()
            );
        }
    }
    Ok(())
}

fn report(mut kv: KvConfig) -> Result<()> {
    let run = take_path(&mut kv, "run")?;
    let out = match kv.remove("out") {
        Some(o) => PathBuf::from(o),
        None => run.clone(),
    };
    if let Some(k) = kv.keys().next() {
        return Err(Error::InvalidConfig(format!("unknown key {k:?} for report")));
    }
    if !run.join(CONFIG_FILE).is_file() && !run.join("metrics.csv").is_file() {
        return Err(Error::NotADataset(run));
    }
    let n = report_from_run(&run, &out)?;
    println!("rendered {n} traces into {}", out.join("plots").display());
    Ok(())
}

fn dispatch(verb: Verb) -> Result<()> {
    match verb {
        Verb::Synth {
            participants,
            seconds,
            fps,
            seed,
            out,
            common,
        } => synth(settings(
            &common,
            &[
                ("participants", s(&participants)),
                ("seconds", s(&seconds)),
                ("fps", s(&fps)),
                ("seed", s(&seed)),
                ("out", p(&out)),
            ],
        )?),
        Verb::Track {
            data,
            clusters,
            seed,
            out,
            common,
        } => track(settings(
            &common,
            &[
                ("data", p(&data)),
                ("clusters", s(&clusters)),
                ("seed", s(&seed)),
                ("out", p(&out)),
            ],
        )?),
        Verb::Train {
            method,
            arch,
            data,
            seed,
            out,
            common,
        } => train(settings(
            &common,
            &[
                ("method", method),
                ("arch", arch),
                ("data", p(&data)),
                ("seed", s(&seed)),
                ("out", p(&out)),
            ],
        )?),
        Verb::Eval {
            model,
            data,
            participant,
            out,
            common,
        } => eval(settings(
            &common,
            &[
                ("model", p(&model)),
                ("data", p(&data)),
                ("participant", s(&participant)),
                ("out", p(&out)),
            ],
        )?),
        Verb::Visualize {
            model,
            layer,
            unit,
            seed,
            out,
            common,
        } => visualize(settings(
            &common,
            &[
                ("model", p(&model)),
                ("layer", s(&layer)),
                ("unit", s(&unit)),
                ("seed", s(&seed)),
                ("out", p(&out)),
            ],
        )?),
        Verb::Report { run, out, common } => report(settings(&common, &[("run", p(&run)), ("out", p(&out))])?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numeric => 3,
            })
        }
    }
}
